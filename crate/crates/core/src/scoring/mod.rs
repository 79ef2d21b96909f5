//! Scorers turn an instance into a normalized confidence distribution over
//! its choices.
//!
//! The built-in scorers need no model:
//!
//! * `Uniform` gives every choice `1/n`.
//! * `Oracle` puts `1 - ε` on the labeled (or pseudo-correct) choice.
//! * `Lexical` weights each choice by `1 + |tokens shared with the prompt|`,
//!   a deliberately surface-biased model.
//! * `Noisy` draws Dirichlet weights from a per-instance seeded stream.
//!
//! `File` replays a confidence dump and `Remote` calls a scoring service over
//! HTTP (see [`remote`]).

pub mod remote;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::probes::instance_rng;
use crate::text::overlap_count;

pub use remote::RemoteScorer;

/// Tolerance on the sum of incoming confidences before renormalization.
pub const SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub instance_id: String,
    pub confidences: Vec<f64>,
    pub predicted_index: usize,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl ConfidenceSet {
    fn from_normalized(instance_id: impl Into<String>, confidences: Vec<f64>) -> Self {
        let predicted_index = argmax(&confidences);
        ConfidenceSet { instance_id: instance_id.into(), confidences, predicted_index }
    }

    /// Validates and renormalizes `raw` for an `n`-choice instance.
    pub fn from_raw(instance_id: impl Into<String>, raw: &[f64], n: usize) -> Result<Self> {
        Ok(Self::from_normalized(instance_id, validate_confidences(raw, n)?))
    }

    pub fn len(&self) -> usize {
        self.confidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confidences.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.confidences[self.predicted_index]
    }
}

/// Accepts a length-`n` vector of finite, non-negative values summing to
/// 1 within [`SUM_TOLERANCE`] and returns it rescaled to sum to one.
/// Vectors already normalized to rounding error are kept verbatim, so a
/// dump read back and rewritten is byte-identical.
pub fn validate_confidences(raw: &[f64], n: usize) -> Result<Vec<f64>> {
    if raw.len() != n {
        return Err(Error::InvalidConfidences(format!("{} values for {n} choices", raw.len())));
    }
    if let Some(x) = raw.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidConfidences(format!("non-finite value {x}")));
    }
    if let Some(x) = raw.iter().find(|&&x| x < 0.0) {
        return Err(Error::InvalidConfidences(format!("negative value {x}")));
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidConfidences(format!("sum {sum} is not 1")));
    }
    if (sum - 1.0).abs() <= 1e-12 {
        return Ok(raw.to_vec());
    }
    Ok(raw.iter().map(|x| x / sum).collect())
}

fn normalize(id: &str, weights: Vec<f64>) -> ConfidenceSet {
    let sum: f64 = weights.iter().sum();
    ConfidenceSet::from_normalized(id, weights.into_iter().map(|w| w / sum).collect())
}

pub trait Scorer: Send + Sync {
    /// One confidence set per instance, in input order.
    fn score(&self, instances: &[Instance]) -> Result<Vec<ConfidenceSet>>;

    /// Whether repeated calls give identical output.
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Serializable scorer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScorerSpec {
    Uniform,
    Oracle {
        epsilon: f64,
    },
    Lexical,
    Noisy {
        seed: u64,
        concentration: f64,
    },
    File {
        path: PathBuf,
    },
    Remote {
        endpoint: String,
        #[serde(default = "remote::default_batch_size")]
        batch_size: usize,
        #[serde(default = "remote::default_timeout_secs")]
        timeout_secs: f64,
        #[serde(default = "remote::default_in_flight")]
        max_in_flight: usize,
    },
}

impl ScorerSpec {
    pub fn build(&self) -> Result<Box<dyn Scorer>> {
        Ok(match self {
            ScorerSpec::Uniform => Box::new(UniformScorer),
            ScorerSpec::Oracle { epsilon } => Box::new(OracleScorer::new(*epsilon)?),
            ScorerSpec::Lexical => Box::new(LexicalScorer),
            ScorerSpec::Noisy { seed, concentration } => Box::new(NoisyScorer::new(*seed, *concentration)?),
            ScorerSpec::File { path } => Box::new(FileScorer::open(path)?),
            ScorerSpec::Remote { endpoint, batch_size, timeout_secs, max_in_flight } => Box::new(
                RemoteScorer::new(endpoint.clone())
                    .batch_size(*batch_size)?
                    .timeout(std::time::Duration::from_secs_f64(*timeout_secs))
                    .max_in_flight(*max_in_flight)?,
            ),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScorerSpec::Uniform => "UNIFORM",
            ScorerSpec::Oracle { .. } => "ORACLE",
            ScorerSpec::Lexical => "LEXICAL",
            ScorerSpec::Noisy { .. } => "NOISY",
            ScorerSpec::File { .. } => "FILE",
            ScorerSpec::Remote { .. } => "REMOTE",
        }
    }
}

pub fn score_set(instances: &InstanceSet, scorer: &dyn Scorer) -> Result<Vec<ConfidenceSet>> {
    scorer.score(&instances.instances)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformScorer;

impl Scorer for UniformScorer {
    fn score(&self, instances: &[Instance]) -> Result<Vec<ConfidenceSet>> {
        Ok(instances
            .iter()
            .map(|i| {
                let n = i.num_choices();
                ConfidenceSet::from_normalized(&i.id, vec![1.0 / n as f64; n])
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleScorer {
    epsilon: f64,
}

impl OracleScorer {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("oracle ε = {epsilon} not in (0, 1)")));
        }
        Ok(OracleScorer { epsilon })
    }
}

/// The label an oracle should favour: the correct index, or for probes that
/// remove the answer, the pseudo-correct one.
fn favoured_index(inst: &Instance) -> Option<usize> {
    inst.correct.or_else(|| inst.probe.as_ref().and_then(|l| l.pseudo_correct))
}

impl Scorer for OracleScorer {
    fn score(&self, instances: &[Instance]) -> Result<Vec<ConfidenceSet>> {
        instances
            .iter()
            .map(|i| {
                let target = favoured_index(i).ok_or_else(|| Error::MissingLabel { id: i.id.clone() })?;
                let n = i.num_choices();
                let rest = self.epsilon / (n - 1) as f64;
                let conf = (0..n).map(|j| if j == target { 1.0 - self.epsilon } else { rest }).collect();
                Ok(ConfidenceSet::from_normalized(&i.id, conf))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(&self, instances: &[Instance]) -> Result<Vec<ConfidenceSet>> {
        Ok(instances
            .iter()
            .map(|i| {
                let weights = i.choices.iter().map(|c| 1.0 + overlap_count(c, &i.prompt) as f64).collect();
                normalize(&i.id, weights)
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct NoisyScorer {
    seed: u64,
    gamma: Gamma<f64>,
}

impl NoisyScorer {
    pub fn new(seed: u64, concentration: f64) -> Result<Self> {
        let gamma = Gamma::new(concentration, 1.0)
            .map_err(|e| Error::InvalidArgument(format!("concentration {concentration}: {e}")))?;
        Ok(NoisyScorer { seed, gamma })
    }
}

impl Scorer for NoisyScorer {
    fn score(&self, instances: &[Instance]) -> Result<Vec<ConfidenceSet>> {
        Ok(instances
            .iter()
            .map(|i| {
                let mut rng = instance_rng(self.seed, &i.id);
                let weights =
                    (0..i.num_choices()).map(|_| self.gamma.sample(&mut rng).max(f64::MIN_POSITIVE)).collect();
                normalize(&i.id, weights)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub id: String,
    pub confidences: Vec<f64>,
}

/// Replays confidences recorded in a dump file.
#[derive(Debug, Clone)]
pub struct FileScorer {
    scores: HashMap<String, Vec<f64>>,
}

impl FileScorer {
    pub fn open(path: &Path) -> Result<Self> {
        let mut scores = HashMap::new();
        for rec in read_dump(path)? {
            scores.insert(rec.id, rec.confidences);
        }
        Ok(FileScorer { scores })
    }

    pub fn from_records(records: impl IntoIterator<Item = DumpRecord>) -> Self {
        FileScorer { scores: records.into_iter().map(|r| (r.id, r.confidences)).collect() }
    }
}

impl Scorer for FileScorer {
    fn score(&self, instances: &[Instance]) -> Result<Vec<ConfidenceSet>> {
        instances
            .iter()
            .map(|i| {
                let raw = self.scores.get(&i.id).ok_or_else(|| Error::MissingScore { id: i.id.clone() })?;
                ConfidenceSet::from_raw(&i.id, raw, i.num_choices()).map_err(|e| e.for_instance(&i.id))
            })
            .collect()
    }
}

pub fn read_dump(path: &Path) -> Result<Vec<DumpRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_dump(path: &Path, sets: &[ConfidenceSet]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in sets {
        let rec = DumpRecord { id: s.instance_id.clone(), confidences: s.confidences.clone() };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
