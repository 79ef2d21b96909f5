//! Multi-trial experiments: load, subsample, perturb, score, measure,
//! aggregate, write reports.
//!
//! Trial `t` uses seed `master_seed + t` for both its subsample and its
//! probe, so any single trial can be re-run on its own. Outputs in
//! `output_dir`:
//!
//! * `report.json`: config echo, per-trial blocks, cross-trial aggregates.
//! * `metrics.csv`: one `trial,metric,value` row per trial and metric.
//! * `trial-{t}.jsonl`: the perturbed instances of trial `t`
//!   (plus `trial-{t}-nq.jsonl` for Wrong-Question runs).
//! * `scores-pre.jsonl`, `trial-{t}-scores.jsonl`: confidence dumps.
//! * `timings.json`: wall-clock seconds per phase, kept out of the report so
//!   the report itself is reproducible byte for byte.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{audit, AuditReport};
use crate::corpus::{load_benchmark, write_instances, Benchmark, Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::metrics::{
    self, confidence_at, hit_indicators, stats, ParalysisReport, PriorBiasReport, SubstitutionReport, TTest,
};
use crate::probes::{perturb_with_pool, ProbeKind, ProbeSpec, Sampling};
use crate::scoring::{write_dump, ConfidenceSet, Scorer, ScorerSpec};
use crate::simtext::{EmbeddingProvider, DEFAULT_DIMENSION};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TRIALS: usize = 5;
pub const DEFAULT_PARALYSIS_SUBSAMPLE: usize = 50;
pub const DEFAULT_INSPECTION_SIZE: usize = 25;

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub data: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_map: Option<BTreeMap<String, String>>,
    /// The probe's own `seed` is replaced by each trial's seed.
    pub probe: ProbeSpec,
    pub scorer: ScorerSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dimension: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if self.subsample == Some(0) {
            return Err(Error::InvalidArgument("subsample must be >= 1".into()));
        }
        self.probe.validate(self.benchmark.num_choices())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.master_seed.wrapping_add(trial as u64)
    }

    pub fn load(&self) -> Result<InstanceSet> {
        let map =
            self.field_map.as_ref().map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect::<HashMap<_, _>>());
        load_benchmark(self.benchmark, &self.data, self.labels.as_deref(), map.as_ref())
    }

    /// Embedder for heuristic sampling, `None` otherwise.
    pub fn embedder(&self) -> Result<Option<EmbeddingProvider>> {
        if self.probe.sampling != Some(Sampling::Heuristic) {
            return Ok(None);
        }
        Ok(Some(match &self.embeddings {
            Some(path) => EmbeddingProvider::load(path)?,
            None => EmbeddingProvider::hashed_bow(self.embedding_dimension.unwrap_or(DEFAULT_DIMENSION))?,
        }))
    }

    /// Origins per trial, or `None` for the whole set.
    pub fn subsample_size(&self, set_len: usize) -> Result<Option<usize>> {
        match (self.subsample, self.probe.kind) {
            (Some(k), _) if k > set_len => {
                Err(Error::InvalidArgument(format!("subsample {k} exceeds the {set_len} loaded instances")))
            }
            (Some(k), _) => Ok(Some(k)),
            (None, ProbeKind::ChoiceParalysis) => Ok(Some(DEFAULT_PARALYSIS_SUBSAMPLE.min(set_len))),
            (None, _) => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Everything measured on one perturbed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub kind: ProbeKind,
    pub instances: usize,
    pub num_choices: usize,
    pub accuracy_pre: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_bias: Option<PriorBiasReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substitution: Option<SubstitutionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paralysis: Option<ParalysisReport>,
    /// Wrong-Question runs: confidence in the pseudo-correct choice under
    /// No-Question minus under Wrong-Question.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_difference: Option<MeanStderr>,
    pub comparisons: BTreeMap<String, TTest>,
}

impl TrialMetrics {
    /// Flat scalar view used for CSV rows and cross-trial aggregation.
    pub fn scalars(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("accuracy_pre".to_string(), self.accuracy_pre);
        if let Some(p) = &self.prior_bias {
            m.insert("pseudo_accuracy".into(), p.pseudo_accuracy);
            m.insert("bias_free_level".into(), p.bias_free_level);
            m.insert("mean_variance".into(), p.mean_variance);
            m.insert("variance_stderr".into(), p.stderr);
            m.insert("variance_p_value".into(), p.p_value_vs_zero);
        }
        if let Some(s) = &self.substitution {
            m.insert("anc".into(), s.anc);
            m.insert("anc_post".into(), s.anc_post);
            m.insert("rac".into(), s.rac);
            m.insert("sac".into(), s.sac);
            m.insert("gap_pre".into(), s.gap_pre);
            m.insert("gap_post".into(), s.gap_post);
        }
        if let Some(p) = &self.paralysis {
            m.insert("mean_delta".into(), p.mean_delta);
            m.insert("delta_stderr".into(), p.stderr);
            m.insert("accuracy_post".into(), p.accuracy_post);
            for (k, v) in &p.hits_at_k {
                m.insert(format!("hits_at_{k:02}"), *v);
            }
        }
        if let Some(c) = &self.confidence_difference {
            m.insert("confidence_difference".into(), c.mean);
        }
        m
    }
}

fn origin_of(p: &Instance) -> Result<&str> {
    p.probe
        .as_ref()
        .map(|l| l.origin.as_str())
        .ok_or_else(|| Error::Schema { id: p.id.clone(), message: "instance has no probe lineage".into() })
}

fn lineage_index(p: &Instance, name: &str, idx: Option<usize>) -> Result<usize> {
    idx.ok_or_else(|| Error::Schema { id: p.id.clone(), message: format!("probe.{name} is missing") })
}

fn check_ids(instances: &[Instance], sets: &[ConfidenceSet]) -> Result<()> {
    if instances.len() != sets.len() {
        return Err(Error::LengthMismatch { left: instances.len(), right: sets.len() });
    }
    for (i, c) in instances.iter().zip(sets) {
        if i.id != c.instance_id {
            return Err(Error::InvalidArgument(format!(
                "confidence set `{}` is not aligned with instance `{}`",
                c.instance_id, i.id
            )));
        }
    }
    Ok(())
}

fn try_test(comparisons: &mut BTreeMap<String, TTest>, name: &str, t: Result<TTest>) {
    // too few samples for a test is not an error of the trial
    if let Ok(t) = t {
        comparisons.insert(name.to_string(), t);
    }
}

/// Inputs to [`measure`]. `pre` is aligned with `origins`, `post` and
/// `no_question` with `perturbed`; origins are matched through lineage.
pub struct MeasureInput<'a> {
    pub origins: &'a [Instance],
    pub pre: &'a [ConfidenceSet],
    pub perturbed: &'a [Instance],
    pub post: &'a [ConfidenceSet],
    pub no_question: Option<&'a [ConfidenceSet]>,
}

/// Metric bundle for one perturbed set.
pub fn measure(input: &MeasureInput<'_>) -> Result<TrialMetrics> {
    let MeasureInput { origins, pre, perturbed, post, no_question } = *input;
    check_ids(origins, pre)?;
    check_ids(perturbed, post)?;
    let first = perturbed.first().ok_or_else(|| Error::Degenerate("no perturbed instances to measure".into()))?;
    let kind = first
        .probe
        .as_ref()
        .map(|l| l.kind)
        .ok_or_else(|| Error::Schema { id: first.id.clone(), message: "instance has no probe lineage".into() })?;
    let by_id: HashMap<&str, usize> = origins.iter().enumerate().map(|(i, o)| (o.id.as_str(), i)).collect();

    let mut pre_sets = Vec::with_capacity(perturbed.len());
    let mut pre_correct = Vec::with_capacity(perturbed.len());
    for p in perturbed {
        let lineage = p.probe.as_ref().filter(|l| l.kind == kind).ok_or_else(|| Error::Schema {
            id: p.id.clone(),
            message: format!("mixed probe kinds; expected {kind}"),
        })?;
        let i = *by_id.get(origin_of(p)?).ok_or_else(|| Error::Schema {
            id: p.id.clone(),
            message: format!("origin `{}` not found", lineage.origin),
        })?;
        pre_sets.push(pre[i].clone());
        pre_correct.push(origins[i].correct.ok_or_else(|| Error::MissingLabel { id: origins[i].id.clone() })?);
    }
    let n = perturbed[0].num_choices();
    let pre_hits = hit_indicators(&pre_sets, &pre_correct)?;
    let accuracy_pre = stats::mean(&pre_hits)?;
    let mut comparisons = BTreeMap::new();

    let mut out = TrialMetrics {
        kind,
        instances: perturbed.len(),
        num_choices: n,
        accuracy_pre,
        prior_bias: None,
        substitution: None,
        paralysis: None,
        confidence_difference: None,
        comparisons: BTreeMap::new(),
    };

    if kind == ProbeKind::ChoiceParalysis {
        let post_correct = perturbed
            .iter()
            .map(|p| lineage_index(p, "correct", p.probe.as_ref().and_then(|l| l.correct)))
            .collect::<Result<Vec<_>>>()?;
        let report = metrics::paralysis_report(&pre_sets, post, &pre_correct, &post_correct, n)?;
        try_test(&mut comparisons, "delta_vs_zero", stats::t_one_sample(&report.per_instance_delta, 0.0));
        let post_hits = hit_indicators(post, &post_correct)?;
        try_test(&mut comparisons, "accuracy_post_vs_pre", stats::t_two_sample(&post_hits, &pre_hits));
        out.paralysis = Some(report);
    } else {
        let pseudo = perturbed
            .iter()
            .map(|p| lineage_index(p, "pseudo_correct", p.probe.as_ref().and_then(|l| l.pseudo_correct())))
            .collect::<Result<Vec<_>>>()?;
        let report = metrics::prior_bias_report(post, &pseudo, n)?;
        let hits = hit_indicators(post, &pseudo)?;
        try_test(&mut comparisons, "pseudo_accuracy_vs_bias_free", stats::t_one_sample(&hits, report.bias_free_level));
        try_test(&mut comparisons, "pseudo_accuracy_vs_pre_accuracy", stats::t_two_sample(&hits, &pre_hits));
        out.prior_bias = Some(report);

        if kind == ProbeKind::NoRightAnswer {
            let substituted = perturbed
                .iter()
                .map(|p| lineage_index(p, "substituted", p.probe.as_ref().and_then(|l| l.substituted)))
                .collect::<Result<Vec<_>>>()?;
            out.substitution = Some(metrics::substitution_report(&pre_sets, post, &substituted, &pre_correct)?);
        }
        if kind == ProbeKind::WrongQuestion {
            if let Some(nq) = no_question {
                if nq.len() != perturbed.len() {
                    return Err(Error::LengthMismatch { left: perturbed.len(), right: nq.len() });
                }
                let diff: Vec<f64> =
                    confidence_at(nq, &pseudo)?.iter().zip(confidence_at(post, &pseudo)?).map(|(a, b)| a - b).collect();
                let (mean, stderr) = stats::mean_stderr(&diff)?;
                try_test(&mut comparisons, "confidence_difference_vs_zero", stats::t_one_sample(&diff, 0.0));
                out.confidence_difference = Some(MeanStderr { mean, stderr });
            }
        }
    }
    out.comparisons = comparisons;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<TrialMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// `None` with a single completed trial.
    pub stderr: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
    pub loaded_instances: usize,
    pub completed_trials: usize,
    pub partial: bool,
    pub trials: Vec<TrialReport>,
    pub aggregate: BTreeMap<String, Aggregate>,
    pub comparisons: BTreeMap<String, TTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
}

impl ExperimentReport {
    /// `trial,metric,value` rows.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("trial,metric,value\n");
        for t in &self.trials {
            if let Some(m) = &t.metrics {
                for (k, v) in m.scalars() {
                    let _ = writeln!(out, "{},{k},{v}", t.trial);
                }
            }
        }
        out
    }
}

/// Per-metric mean and stderr over completed trials.
pub fn aggregate(trials: &[TrialReport]) -> Result<BTreeMap<String, Aggregate>> {
    let scalars: Vec<BTreeMap<String, f64>> =
        trials.iter().filter_map(|t| t.metrics.as_ref().map(TrialMetrics::scalars)).collect();
    let Some(first) = scalars.first() else {
        return Ok(BTreeMap::new());
    };
    let mut out = BTreeMap::new();
    for key in first.keys() {
        let values: Vec<f64> = scalars.iter().filter_map(|s| s.get(key).copied()).collect();
        if values.len() != scalars.len() || values.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let (mean, stderr) = if values.len() > 1 {
            let (m, se) = stats::mean_stderr(&values)?;
            (m, Some(se))
        } else {
            (values[0], None)
        };
        out.insert(key.clone(), Aggregate { mean, stderr, values });
    }
    Ok(out)
}

/// Tests over per-trial values (need at least three completed trials).
pub fn cross_trial_comparisons(agg: &BTreeMap<String, Aggregate>) -> BTreeMap<String, TTest> {
    let mut out = BTreeMap::new();
    let get = |k: &str| agg.get(k).map(|a| a.values.as_slice());
    if let (Some(acc), Some(level)) = (get("pseudo_accuracy"), agg.get("bias_free_level")) {
        try_test(&mut out, "pseudo_accuracy_vs_bias_free", stats::t_one_sample(acc, level.mean));
    }
    if let (Some(acc), Some(pre)) = (get("pseudo_accuracy"), get("accuracy_pre")) {
        try_test(&mut out, "pseudo_accuracy_vs_pre_accuracy", stats::t_two_sample(acc, pre));
    }
    if let Some(v) = get("mean_variance") {
        try_test(&mut out, "mean_variance_vs_zero", stats::t_one_sample(v, 0.0));
    }
    if let Some(d) = get("mean_delta") {
        try_test(&mut out, "mean_delta_vs_zero", stats::t_one_sample(d, 0.0));
    }
    if let Some(d) = get("confidence_difference") {
        try_test(&mut out, "confidence_difference_vs_zero", stats::t_one_sample(d, 0.0));
    }
    out
}

fn notes(config: &ExperimentConfig, subsample: Option<usize>) -> Vec<String> {
    let mut n = vec![
        "trial seed = master_seed + trial index; it seeds both the subsample and the probe".to_string(),
        "donors are drawn from the whole loaded set, minus the origin".to_string(),
        "originals are scored once and shared by all trials".to_string(),
    ];
    if let Some(k) = subsample {
        n.push(format!("each trial perturbs a fresh seeded subsample of {k} instances"));
    }
    match config.probe.kind {
        ProbeKind::WrongQuestion => n.push(
            "confidence_difference = mean over instances of (confidence in the pseudo-correct choice under \
             No-Question minus under Wrong-Question), both perturbations using the trial seed"
                .into(),
        ),
        ProbeKind::ChoiceParalysis => {
            n.push("delta = post minus pre confidence in the correct choice; hits@k ties go to the lower index".into())
        }
        _ => {}
    }
    n.push("audit overlap counts are pooled over the whole benchmark before correlating".into());
    if !config.scorer_is_deterministic() {
        n.push("scorer is not deterministic; repeated runs may differ".into());
    }
    n
}

impl ExperimentConfig {
    fn scorer_is_deterministic(&self) -> bool {
        !matches!(self.scorer, ScorerSpec::Remote { .. })
    }
}

/// Seeded uniform sample of `k` positions out of `len`, ascending.
pub fn sample_positions(len: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > len {
        return Err(Error::InvalidArgument(format!("cannot sample {k} of {len}")));
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), len, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

struct Trial {
    perturbed: InstanceSet,
    no_question: Option<InstanceSet>,
    post: Vec<ConfidenceSet>,
    metrics: TrialMetrics,
}

/// Everything a trial shares with the others.
struct Setup<'a> {
    config: &'a ExperimentConfig,
    set: &'a InstanceSet,
    pre: &'a [ConfidenceSet],
    scorer: &'a dyn Scorer,
    embedder: Option<&'a EmbeddingProvider>,
    subsample: Option<usize>,
}

fn run_trial(setup: &Setup<'_>, seed: u64, timings: &mut BTreeMap<String, f64>) -> Result<Trial> {
    let Setup { config, set, pre, scorer, embedder, subsample } = *setup;
    let clock = Instant::now();
    let positions = match subsample {
        Some(k) => sample_positions(set.len(), k, seed)?,
        None => (0..set.len()).collect(),
    };
    let origins: Vec<Instance> = positions.iter().map(|&i| set.instances[i].clone()).collect();
    let origin_pre: Vec<ConfidenceSet> = positions.iter().map(|&i| pre[i].clone()).collect();
    let spec = config.probe.with_seed(seed);
    let perturbed = perturb_with_pool(&origins, set, &spec, embedder)?;
    let no_question = if spec.kind == ProbeKind::WrongQuestion {
        Some(perturb_with_pool(&origins, set, &ProbeSpec::no_question(seed), None)?)
    } else {
        None
    };
    timings.insert("perturb".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let post = scorer.score(&perturbed.instances)?;
    let nq_post = no_question.as_ref().map(|s| scorer.score(&s.instances)).transpose()?;
    timings.insert("score".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let metrics = measure(&MeasureInput {
        origins: &origins,
        pre: &origin_pre,
        perturbed: &perturbed.instances,
        post: &post,
        no_question: nq_post.as_deref(),
    })?;
    timings.insert("measure".into(), clock.elapsed().as_secs_f64());
    Ok(Trial { perturbed, no_question, post, metrics })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every trial of `config` and writes the outputs. Trial failures are
/// recorded in the report rather than returned; only setup and I/O errors
/// abort the run.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut timings: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut setup = BTreeMap::new();

    let clock = Instant::now();
    let set = config.load()?;
    let subsample = config.subsample_size(set.len())?;
    let embedder = config.embedder()?;
    let scorer = config.scorer.build()?;
    setup.insert("load".to_string(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let pre = scorer.score(&set.instances);
    setup.insert("score_originals".to_string(), clock.elapsed().as_secs_f64());
    timings.insert("setup".into(), setup);
    if let Ok(pre) = &pre {
        write_dump(&out_dir.join("scores-pre.jsonl"), pre)?;
    }

    let mut trials = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let seed = config.trial_seed(t);
        let mut phase = BTreeMap::new();
        let result = match &pre {
            Ok(pre) => {
                let setup =
                    Setup { config, set: &set, pre, scorer: scorer.as_ref(), embedder: embedder.as_ref(), subsample };
                run_trial(&setup, seed, &mut phase)
            }
            Err(e) => Err(Error::InvalidArgument(format!("scoring originals failed: {e}"))),
        };
        timings.insert(format!("trial-{t}"), phase);
        trials.push(match result {
            Ok(trial) => {
                write_instances(&trial.perturbed.instances, &out_dir.join(format!("trial-{t}.jsonl")))?;
                if let Some(nq) = &trial.no_question {
                    write_instances(&nq.instances, &out_dir.join(format!("trial-{t}-nq.jsonl")))?;
                }
                write_dump(&out_dir.join(format!("trial-{t}-scores.jsonl")), &trial.post)?;
                TrialReport { trial: t, seed, status: TrialStatus::Ok, error: None, metrics: Some(trial.metrics) }
            }
            Err(e) => {
                TrialReport { trial: t, seed, status: TrialStatus::Error, error: Some(e.to_string()), metrics: None }
            }
        });
    }

    let aggregate = aggregate(&trials)?;
    let comparisons = cross_trial_comparisons(&aggregate);
    let mut notes = notes(config, subsample);
    let audit = match &pre {
        Ok(pre) => match audit(&set, Some(pre)) {
            Ok(a) => Some(a),
            Err(e) => {
                notes.push(format!("audit skipped: {e}"));
                None
            }
        },
        Err(_) => None,
    };
    let completed = trials.iter().filter(|t| t.status == TrialStatus::Ok).count();
    let report = ExperimentReport {
        schema: SCHEMA_VERSION,
        config: config.clone(),
        notes,
        loaded_instances: set.len(),
        completed_trials: completed,
        partial: completed < config.trials,
        trials,
        aggregate,
        comparisons,
        audit,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    let csv_path = out_dir.join("metrics.csv");
    std::fs::write(&csv_path, report.metrics_csv()).map_err(|e| Error::io(&csv_path, e))?;
    write_json(&out_dir.join("timings.json"), &timings)?;
    Ok(report)
}

/// Seeded sample of `k` instances for manual inspection, in input order.
pub fn sample_for_inspection(instances: &[Instance], k: usize, seed: u64) -> Result<Vec<&Instance>> {
    Ok(sample_positions(instances.len(), k, seed)?.into_iter().map(|i| &instances[i]).collect())
}

/// Human-readable rendering of one instance and its lineage.
pub fn render_instance(inst: &Instance) -> String {
    let mut out = format!("[{}] {}\n", inst.id, inst.benchmark);
    if let Some(l) = &inst.probe {
        let _ = writeln!(out, "  probe: {} from {} (seed {})", l.kind, l.origin, l.seed);
        if !l.donors.is_empty() {
            let _ = writeln!(out, "  donors: {}", l.donors.join(", "));
        }
    }
    let prompt = if inst.prompt.is_empty() { "<empty>" } else { inst.prompt.as_str() };
    let _ = writeln!(out, "  prompt: {prompt}");
    let lineage = inst.probe.as_ref();
    for (i, c) in inst.choices.iter().enumerate() {
        let mut marks = Vec::new();
        if inst.correct == Some(i) || lineage.and_then(|l| l.correct) == Some(i) {
            marks.push("correct");
        }
        if lineage.and_then(|l| l.pseudo_correct) == Some(i) {
            marks.push("pseudo-correct");
        }
        if lineage.and_then(|l| l.substituted) == Some(i) {
            marks.push("substituted");
        }
        let tag = if marks.is_empty() { String::new() } else { format!("  <- {}", marks.join(", ")) };
        let _ = writeln!(out, "  {i}: {c}{tag}");
    }
    out
}
