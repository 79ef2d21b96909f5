//! MaxProb detection of perturbed instances.
//!
//! A threshold is learned as the mean maximum confidence over a training
//! half that contains every instance twice, once as-is and once perturbed.
//! Held-out sets whose maximum confidence exceeds the threshold are judged
//! original; everything else (ties included) is judged perturbed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Benchmark, Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::probes::{perturb_set, ProbeKind, ProbeSpec};
use crate::scoring::{ConfidenceSet, Scorer};
use crate::simtext::EmbeddingProvider;

pub const MIN_SPLIT_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxProbModel {
    pub threshold: f64,
    pub probe: ProbeKind,
    pub benchmark: Benchmark,
    pub train_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Judgment {
    Original,
    Perturbed,
}

/// Splits `set` into disjoint train and eval halves. The train half gets the
/// extra instance when `|set|` is odd; both halves keep the input order.
pub fn split_for_calibration(set: &InstanceSet, seed: u64) -> Result<(InstanceSet, InstanceSet)> {
    let (train, eval) = split_indices(set.len(), seed)?;
    let pick = |idx: &[usize]| -> Vec<Instance> { idx.iter().map(|&i| set.instances[i].clone()).collect() };
    Ok((InstanceSet::new(set.benchmark, pick(&train))?, InstanceSet::new(set.benchmark, pick(&eval))?))
}

/// Positions of the train and eval halves, each sorted ascending.
pub fn split_indices(len: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if len < MIN_SPLIT_SIZE {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least {MIN_SPLIT_SIZE} instances, got {len}"
        )));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..len.div_ceil(2)].to_vec();
    let mut eval = order[len.div_ceil(2)..].to_vec();
    train.sort_unstable();
    eval.sort_unstable();
    Ok((train, eval))
}

/// Threshold = mean max-confidence over the pooled original and perturbed
/// sets, each set weighted equally.
pub fn learn_threshold(
    original: &[ConfidenceSet],
    perturbed: &[ConfidenceSet],
    probe: ProbeKind,
    benchmark: Benchmark,
) -> Result<MaxProbModel> {
    if original.is_empty() || perturbed.is_empty() {
        return Err(Error::Degenerate("threshold needs both original and perturbed confidence sets".into()));
    }
    let threshold = original.iter().chain(perturbed).map(ConfidenceSet::max).sum::<f64>()
        / (original.len() + perturbed.len()) as f64;
    Ok(MaxProbModel { threshold, probe, benchmark, train_size: original.len() })
}

pub fn classify(c: &ConfidenceSet, model: &MaxProbModel) -> Judgment {
    if c.max() > model.threshold {
        Judgment::Original
    } else {
        Judgment::Perturbed
    }
}

/// Fraction of held-out judgments that are right, over both forms.
pub fn evaluate(
    eval_original: &[ConfidenceSet],
    eval_perturbed: &[ConfidenceSet],
    model: &MaxProbModel,
) -> Result<f64> {
    let total = eval_original.len() + eval_perturbed.len();
    if total == 0 {
        return Err(Error::Degenerate("nothing to evaluate".into()));
    }
    let right = eval_original.iter().filter(|c| classify(c, model) == Judgment::Original).count()
        + eval_perturbed.iter().filter(|c| classify(c, model) == Judgment::Perturbed).count();
    Ok(right as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub model: MaxProbModel,
    pub accuracy: f64,
    pub eval_size: usize,
    pub split_seed: u64,
}

/// Perturbs all of `set` (donors drawn from the whole set), scores both
/// forms, splits by `seed`, learns on the train half and evaluates on the
/// other.
pub fn calibrate(
    set: &InstanceSet,
    spec: &ProbeSpec,
    scorer: &dyn Scorer,
    embedder: Option<&EmbeddingProvider>,
    seed: u64,
) -> Result<CalibrationReport> {
    let (train, eval) = split_indices(set.len(), seed)?;
    let perturbed = perturb_set(set, spec, embedder)?;
    let original = scorer.score(&set.instances)?;
    let post = scorer.score(&perturbed.instances)?;
    let pick = |sets: &[ConfidenceSet], idx: &[usize]| -> Vec<ConfidenceSet> {
        idx.iter().map(|&i| sets[i].clone()).collect()
    };
    let model = learn_threshold(&pick(&original, &train), &pick(&post, &train), spec.kind, set.benchmark)?;
    let accuracy = evaluate(&pick(&original, &eval), &pick(&post, &eval), &model)?;
    Ok(CalibrationReport { model, accuracy, eval_size: eval.len(), split_seed: seed })
}
