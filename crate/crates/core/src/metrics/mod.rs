//! Bias and paralysis metrics over paired original/perturbed confidence sets.
//!
//! * Prior bias: the population variance of the confidence set of an
//!   instance that has no correct answer. An unbiased scorer spreads its
//!   confidence uniformly, giving zero variance; the aggregate is tested
//!   against zero with a one-sample t test.
//! * Pseudo-accuracy: how often the scorer still picks the pseudo-correct
//!   choice. The bias-free level is `1/n`.
//! * Choice paralysis: the change in confidence assigned to the correct
//!   choice when the choice set grows (`post - pre`), together with hits@k.
//! * Substitution: average confidence in non-substituted choices versus the
//!   correct (before) or substituted (after) choice.

pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ConfidenceSet;

pub use stats::TTest;

/// Population variance of the confidence vector.
pub fn confidence_variance(c: &ConfidenceSet) -> f64 {
    let n = c.confidences.len() as f64;
    let mean = c.confidences.iter().sum::<f64>() / n;
    c.confidences.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

pub fn bias_free_level(n: usize) -> f64 {
    debug_assert!(n >= 2);
    1.0 / n as f64
}

fn check_aligned(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

fn check_index(c: &ConfidenceSet, idx: usize) -> Result<()> {
    if idx >= c.len() {
        return Err(Error::InvalidArgument(format!(
            "index {idx} out of range for `{}` with {} choices",
            c.instance_id,
            c.len()
        )));
    }
    Ok(())
}

/// 1.0 where the prediction equals `indices[i]`, else 0.0.
pub fn hit_indicators(confsets: &[ConfidenceSet], indices: &[usize]) -> Result<Vec<f64>> {
    check_aligned(confsets.len(), indices.len())?;
    confsets
        .iter()
        .zip(indices)
        .map(|(c, &i)| {
            check_index(c, i)?;
            Ok(if c.predicted_index == i { 1.0 } else { 0.0 })
        })
        .collect()
}

pub fn pseudo_accuracy(confsets: &[ConfidenceSet], pseudo_indices: &[usize]) -> Result<f64> {
    let hits = hit_indicators(confsets, pseudo_indices)?;
    if hits.is_empty() {
        return Err(Error::Degenerate("pseudo-accuracy of an empty set".into()));
    }
    Ok(hits.iter().sum::<f64>() / hits.len() as f64)
}

/// Confidence each set assigns to its indexed choice.
pub fn confidence_at(confsets: &[ConfidenceSet], indices: &[usize]) -> Result<Vec<f64>> {
    check_aligned(confsets.len(), indices.len())?;
    confsets
        .iter()
        .zip(indices)
        .map(|(c, &i)| {
            check_index(c, i)?;
            Ok(c.confidences[i])
        })
        .collect()
}

/// Zero-based rank of `idx` when choices are sorted by descending confidence,
/// ties going to the lower index.
pub fn rank_of(c: &ConfidenceSet, idx: usize) -> usize {
    let target = c.confidences[idx];
    c.confidences.iter().enumerate().filter(|&(j, &x)| x > target || (x == target && j < idx)).count()
}

pub fn hits_at_k(c: &ConfidenceSet, idx: usize, k: usize) -> bool {
    rank_of(c, idx) < k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBiasReport {
    #[serde(skip)]
    pub per_instance_variance: Vec<f64>,
    pub mean_variance: f64,
    pub stderr: f64,
    pub p_value_vs_zero: f64,
    pub pseudo_accuracy: f64,
    pub bias_free_level: f64,
}

/// Aggregates prior bias over perturbed instances that have no correct answer.
pub fn prior_bias_report(post: &[ConfidenceSet], pseudo_indices: &[usize], n: usize) -> Result<PriorBiasReport> {
    if post.is_empty() {
        return Err(Error::Degenerate("prior bias of an empty set".into()));
    }
    let per_instance_variance: Vec<f64> = post.iter().map(confidence_variance).collect();
    let (mean_variance, stderr) = stats::mean_stderr(&per_instance_variance)?;
    let test = stats::t_one_sample(&per_instance_variance, 0.0)?;
    Ok(PriorBiasReport {
        mean_variance,
        stderr,
        p_value_vs_zero: test.p,
        pseudo_accuracy: pseudo_accuracy(post, pseudo_indices)?,
        bias_free_level: bias_free_level(n),
        per_instance_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParalysisReport {
    #[serde(skip)]
    pub per_instance_delta: Vec<f64>,
    pub mean_delta: f64,
    pub stderr: f64,
    pub accuracy_post: f64,
    pub hits_at_k: BTreeMap<usize, f64>,
}

/// Change in confidence in the correct choice between the original
/// (`pre`) and enlarged (`post`) instances, plus hits@k for `k = 1..=n`.
pub fn paralysis_report(
    pre: &[ConfidenceSet],
    post: &[ConfidenceSet],
    pre_correct: &[usize],
    post_correct: &[usize],
    n: usize,
) -> Result<ParalysisReport> {
    check_aligned(pre.len(), post.len())?;
    let before = confidence_at(pre, pre_correct)?;
    let after = confidence_at(post, post_correct)?;
    if let Some(c) = post.iter().find(|c| c.len() != n) {
        return Err(Error::InvalidArgument(format!("`{}` has {} choices, expected {n}", c.instance_id, c.len())));
    }
    let per_instance_delta: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    let (mean_delta, stderr) = stats::mean_stderr(&per_instance_delta)?;
    let m = post.len() as f64;
    let hits_at_k = (1..=n)
        .map(|k| {
            let hits = post.iter().zip(post_correct).filter(|(c, &i)| hits_at_k(c, i, k)).count();
            (k, hits as f64 / m)
        })
        .collect();
    Ok(ParalysisReport {
        mean_delta,
        stderr,
        accuracy_post: pseudo_accuracy(post, post_correct)?,
        hits_at_k,
        per_instance_delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionStderrs {
    pub anc: f64,
    pub anc_post: f64,
    pub rac: f64,
    pub sac: f64,
    pub gap_post: f64,
    pub gap_pre: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionReport {
    /// Mean pre-intervention confidence in the incorrect choices.
    pub anc: f64,
    /// Mean post-intervention confidence in the non-substituted choices.
    pub anc_post: f64,
    /// Mean pre-intervention confidence in the correct choice.
    pub rac: f64,
    /// Mean post-intervention confidence in the substituted choice.
    pub sac: f64,
    pub gap_post: f64,
    pub gap_pre: f64,
    pub stderr: SubstitutionStderrs,
}

fn mean_of_others(c: &ConfidenceSet, skip: usize) -> f64 {
    let (sum, count) = c
        .confidences
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .fold((0.0, 0usize), |(s, k), (_, x)| (s + x, k + 1));
    sum / count as f64
}

pub fn substitution_report(
    pre: &[ConfidenceSet],
    post: &[ConfidenceSet],
    substituted: &[usize],
    correct: &[usize],
) -> Result<SubstitutionReport> {
    check_aligned(pre.len(), post.len())?;
    let rac_i = confidence_at(pre, correct)?;
    let sac_i = confidence_at(post, substituted)?;
    let anc_i: Vec<f64> = pre.iter().zip(correct).map(|(c, &i)| mean_of_others(c, i)).collect();
    let anc_post_i: Vec<f64> = post.iter().zip(substituted).map(|(c, &i)| mean_of_others(c, i)).collect();
    let gap_pre_i: Vec<f64> = anc_i.iter().zip(&rac_i).map(|(a, r)| a - r).collect();
    let gap_post_i: Vec<f64> = anc_post_i.iter().zip(&sac_i).map(|(a, s)| a - s).collect();

    let (anc, anc_se) = stats::mean_stderr(&anc_i)?;
    let (anc_post, anc_post_se) = stats::mean_stderr(&anc_post_i)?;
    let (rac, rac_se) = stats::mean_stderr(&rac_i)?;
    let (sac, sac_se) = stats::mean_stderr(&sac_i)?;
    Ok(SubstitutionReport {
        anc,
        anc_post,
        rac,
        sac,
        gap_post: anc_post - sac,
        gap_pre: anc - rac,
        stderr: SubstitutionStderrs {
            anc: anc_se,
            anc_post: anc_post_se,
            rac: rac_se,
            sac: sac_se,
            gap_post: stats::mean_stderr(&gap_post_i)?.1,
            gap_pre: stats::mean_stderr(&gap_pre_i)?.1,
        },
    })
}

/// Per-instance difference in confidence at `indices` between two scorings
/// of the same origins, `a - b`.
pub fn confidence_difference(a: &[ConfidenceSet], b: &[ConfidenceSet], indices: &[usize]) -> Result<Vec<f64>> {
    check_aligned(a.len(), b.len())?;
    let ca = confidence_at(a, indices)?;
    let cb = confidence_at(b, indices)?;
    Ok(ca.iter().zip(&cb).map(|(x, y)| x - y).collect())
}
