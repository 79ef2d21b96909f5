//! Benchmark and scorer irregularities: label position balance, length of
//! selected versus non-selected choices, and how similar the prompt-overlap
//! vocabulary is between selected and non-selected choices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Benchmark, InstanceSet};
use crate::error::{Error, Result};
use crate::metrics::stats;
use crate::scoring::ConfidenceSet;
use crate::text::{token_set, tokens, word_count};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionCount {
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthBias {
    pub selected_mean: f64,
    pub selected_stderr: f64,
    pub selected_ci95: (f64, f64),
    pub nonselected_mean: f64,
    pub selected_count: usize,
    pub nonselected_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapCorrelation {
    pub pearson: f64,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub benchmark: Benchmark,
    pub instances: usize,
    pub label_frequencies: BTreeMap<usize, PositionCount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<LengthBias>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapCorrelation>,
}

/// Count and fraction of correct answers at each position.
pub fn label_balance(set: &InstanceSet) -> Result<BTreeMap<usize, PositionCount>> {
    let mut counts = vec![0usize; set.num_choices];
    for inst in set.iter() {
        let c = inst.correct.ok_or_else(|| Error::MissingLabel { id: inst.id.clone() })?;
        counts[c] += 1;
    }
    let total = set.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| (i, PositionCount { count, fraction: count as f64 / total }))
        .collect())
}

fn check_alignment(set: &InstanceSet, confsets: &[ConfidenceSet]) -> Result<()> {
    if set.len() != confsets.len() {
        return Err(Error::LengthMismatch { left: set.len(), right: confsets.len() });
    }
    if set.is_empty() {
        return Err(Error::Degenerate("audit of an empty set".into()));
    }
    for (inst, c) in set.iter().zip(confsets) {
        if inst.id != c.instance_id || inst.num_choices() != c.len() {
            return Err(Error::InvalidArgument(format!(
                "confidence set `{}` does not match instance `{}`",
                c.instance_id, inst.id
            )));
        }
    }
    Ok(())
}

/// Whitespace word counts of the choices the scorer picked versus all the
/// others. The interval is `mean ± 1.96 · stderr`, collapsing to the mean
/// when there is a single selection.
pub fn length_bias(set: &InstanceSet, confsets: &[ConfidenceSet]) -> Result<LengthBias> {
    check_alignment(set, confsets)?;
    let mut selected = Vec::with_capacity(set.len());
    let mut others = Vec::new();
    for (inst, c) in set.iter().zip(confsets) {
        for (j, choice) in inst.choices.iter().enumerate() {
            let w = word_count(choice) as f64;
            if j == c.predicted_index {
                selected.push(w);
            } else {
                others.push(w);
            }
        }
    }
    let (selected_mean, selected_stderr) =
        if selected.len() > 1 { stats::mean_stderr(&selected)? } else { (selected[0], 0.0) };
    let half = 1.96 * selected_stderr;
    Ok(LengthBias {
        selected_mean,
        selected_stderr,
        selected_ci95: (selected_mean - half, selected_mean + half),
        nonselected_mean: if others.is_empty() { f64::NAN } else { stats::mean(&others)? },
        selected_count: selected.len(),
        nonselected_count: others.len(),
    })
}

/// Tokens of `choice` that also occur in `prompt`, with multiplicity.
fn overlap_tokens(prompt: &str, choice: &str) -> Vec<String> {
    let vocab = token_set(prompt);
    tokens(choice).into_iter().filter(|t| vocab.contains(t)).collect()
}

/// Pooled frequency vectors of prompt-overlap tokens for selected and
/// non-selected choices, over their union vocabulary.
pub fn overlap_frequencies(set: &InstanceSet, confsets: &[ConfidenceSet]) -> Result<BTreeMap<String, (f64, f64)>> {
    check_alignment(set, confsets)?;
    let mut freq: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (inst, c) in set.iter().zip(confsets) {
        for (j, choice) in inst.choices.iter().enumerate() {
            for t in overlap_tokens(&inst.prompt, choice) {
                let e = freq.entry(t).or_default();
                if j == c.predicted_index {
                    e.0 += 1.0;
                } else {
                    e.1 += 1.0;
                }
            }
        }
    }
    Ok(freq)
}

pub fn overlap_correlation(set: &InstanceSet, confsets: &[ConfidenceSet]) -> Result<OverlapCorrelation> {
    let freq = overlap_frequencies(set, confsets)?;
    if freq.len() < 2 {
        return Err(Error::Degenerate(format!("overlap vocabulary has {} words, need at least 2", freq.len())));
    }
    let (sel, non): (Vec<f64>, Vec<f64>) = freq.values().copied().unzip();
    Ok(OverlapCorrelation { pearson: stats::pearson(&sel, &non)?, vocab_size: freq.len() })
}

/// Label balance always; the scorer-dependent parts when `confsets` is given.
pub fn audit(set: &InstanceSet, confsets: Option<&[ConfidenceSet]>) -> Result<AuditReport> {
    let (length, overlap) = match confsets {
        Some(c) => (Some(length_bias(set, c)?), Some(overlap_correlation(set, c)?)),
        None => (None, None),
    };
    Ok(AuditReport {
        benchmark: set.benchmark,
        instances: set.len(),
        label_frequencies: label_balance(set)?,
        length,
        overlap,
    })
}

impl AuditReport {
    /// `metric,key,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,key,value\n");
        let mut row = |m: &str, k: &str, v: String| {
            let _ = writeln!(out, "{m},{k},{v}");
        };
        row("instances", "", self.instances.to_string());
        for (pos, pc) in &self.label_frequencies {
            row("label_count", &pos.to_string(), pc.count.to_string());
            row("label_fraction", &pos.to_string(), pc.fraction.to_string());
        }
        if let Some(l) = &self.length {
            row("selected_mean_len", "", l.selected_mean.to_string());
            row("selected_len_ci95", "lo", l.selected_ci95.0.to_string());
            row("selected_len_ci95", "hi", l.selected_ci95.1.to_string());
            row("nonselected_mean_len", "", l.nonselected_mean.to_string());
        }
        if let Some(o) = &self.overlap {
            row("overlap_pearson", "", o.pearson.to_string());
            row("vocab_size", "", o.vocab_size.to_string());
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
