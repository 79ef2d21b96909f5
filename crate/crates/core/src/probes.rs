//! The four confusion probes.
//!
//! Every probe is a pure function of the origin instance, the donor pool and
//! the [`ProbeSpec`]. Randomness comes from a ChaCha stream seeded with
//! `spec.seed ^ fnv1a64(origin.id)`, so instances can be perturbed in any
//! order or in parallel and still produce the same output.
//!
//! * No-Question drops the prompt.
//! * Wrong-Question swaps in the prompt of another instance.
//! * No-Right-Answer replaces the correct choice with another instance's
//!   correct choice.
//! * Choice Paralysis discards the incorrect choices and adds the correct
//!   choices of `n - 1` donors, sampled at random or by prompt similarity.
//!
//! After the first three probes the instance has no correct answer; the old
//! correct choice (or the pseudo-choice that replaced it) becomes the
//! pseudo-correct choice.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::simtext::{EmbeddingProvider, TextRef};
use crate::text::{fnv1a64, shares_any_token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeKind {
    NoQuestion,
    WrongQuestion,
    NoRightAnswer,
    ChoiceParalysis,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 4] =
        [ProbeKind::NoQuestion, ProbeKind::WrongQuestion, ProbeKind::NoRightAnswer, ProbeKind::ChoiceParalysis];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::NoQuestion => "NO_QUESTION",
            ProbeKind::WrongQuestion => "WRONG_QUESTION",
            ProbeKind::NoRightAnswer => "NO_RIGHT_ANSWER",
            ProbeKind::ChoiceParalysis => "CHOICE_PARALYSIS",
        }
    }

    /// Probes that leave the instance without a correct answer.
    pub fn removes_answer(self) -> bool {
        self != ProbeKind::ChoiceParalysis
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "no-question" | "nq" => Ok(ProbeKind::NoQuestion),
            "wrong-question" | "wq" => Ok(ProbeKind::WrongQuestion),
            "no-right-answer" | "nra" => Ok(ProbeKind::NoRightAnswer),
            "choice-paralysis" | "cp" => Ok(ProbeKind::ChoiceParalysis),
            _ => Err(Error::InvalidProbe(format!("unknown probe `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sampling {
    Random,
    Heuristic,
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Sampling::Random),
            "heuristic" => Ok(Sampling::Heuristic),
            _ => Err(Error::InvalidProbe(format!("unknown sampling `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub kind: ProbeKind,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub sampling: Option<Sampling>,
    #[serde(default)]
    pub disjoint_prompt: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ProbeSpec {
    pub fn no_question(seed: u64) -> Self {
        ProbeSpec { kind: ProbeKind::NoQuestion, n: None, sampling: None, disjoint_prompt: false, seed }
    }

    pub fn wrong_question(seed: u64, disjoint_prompt: bool) -> Self {
        ProbeSpec { kind: ProbeKind::WrongQuestion, disjoint_prompt, ..Self::no_question(seed) }
    }

    pub fn no_right_answer(seed: u64) -> Self {
        ProbeSpec { kind: ProbeKind::NoRightAnswer, ..Self::no_question(seed) }
    }

    pub fn choice_paralysis(n: usize, sampling: Sampling, seed: u64) -> Self {
        ProbeSpec {
            kind: ProbeKind::ChoiceParalysis,
            n: Some(n),
            sampling: Some(sampling),
            disjoint_prompt: false,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ProbeSpec { seed, ..self.clone() }
    }

    /// Checks the spec against an origin choice count, when known.
    pub fn validate(&self, original_choices: Option<usize>) -> Result<()> {
        let cp = self.kind == ProbeKind::ChoiceParalysis;
        if cp != self.n.is_some() {
            return Err(Error::InvalidProbe("`n` is required for, and only for, CHOICE_PARALYSIS".into()));
        }
        if cp != self.sampling.is_some() {
            return Err(Error::InvalidProbe("`sampling` is required for, and only for, CHOICE_PARALYSIS".into()));
        }
        if self.disjoint_prompt && self.kind != ProbeKind::WrongQuestion {
            return Err(Error::InvalidProbe("`disjoint` applies to WRONG_QUESTION only".into()));
        }
        if let (Some(n), Some(orig)) = (self.n, original_choices) {
            if n <= orig {
                return Err(Error::InvalidProbe(format!("n = {n} must exceed the original {orig} choices")));
            }
        }
        Ok(())
    }

    /// Short tag used in perturbed instance ids.
    pub fn tag(&self) -> String {
        match self.kind {
            ProbeKind::NoQuestion => "nq".into(),
            ProbeKind::WrongQuestion if self.disjoint_prompt => "wqd".into(),
            ProbeKind::WrongQuestion => "wq".into(),
            ProbeKind::NoRightAnswer => "nra".into(),
            ProbeKind::ChoiceParalysis => format!(
                "cp{}{}",
                self.n.unwrap_or(0),
                match self.sampling {
                    Some(Sampling::Heuristic) => "h",
                    _ => "r",
                }
            ),
        }
    }

    /// Id of the instance this spec derives from `origin_id`.
    pub fn perturbed_id(&self, origin_id: &str) -> String {
        format!("{origin_id}/{}/{}", self.tag(), self.seed)
    }
}

/// Provenance of a perturbed instance, stored as the `probe` object of its
/// JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub kind: ProbeKind,
    pub n: Option<usize>,
    pub sampling: Option<Sampling>,
    #[serde(default)]
    pub disjoint: bool,
    pub seed: u64,
    pub origin: String,
    pub donors: Vec<String>,
    pub pseudo_correct: Option<usize>,
    pub correct: Option<usize>,
    pub substituted: Option<usize>,
}

impl Lineage {
    fn new(spec: &ProbeSpec, origin: &Instance) -> Self {
        Lineage {
            kind: spec.kind,
            n: spec.n,
            sampling: spec.sampling,
            disjoint: spec.disjoint_prompt,
            seed: spec.seed,
            origin: origin.id.clone(),
            donors: Vec::new(),
            pseudo_correct: None,
            correct: None,
            substituted: None,
        }
    }

    pub(crate) fn validate_indices(&self, num_choices: usize) -> std::result::Result<(), String> {
        for (name, idx) in
            [("pseudo_correct", self.pseudo_correct), ("correct", self.correct), ("substituted", self.substituted)]
        {
            if let Some(i) = idx {
                if i >= num_choices {
                    return Err(format!("probe.{name} = {i} out of range"));
                }
            }
        }
        Ok(())
    }

    /// The index whose selection counts towards pseudo-accuracy.
    pub fn pseudo_correct(&self) -> Option<usize> {
        self.pseudo_correct
    }

    pub fn to_spec(&self) -> ProbeSpec {
        ProbeSpec {
            kind: self.kind,
            n: self.n,
            sampling: self.sampling,
            disjoint_prompt: self.disjoint,
            seed: self.seed,
        }
    }
}

pub(crate) fn instance_rng(seed: u64, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(id.as_bytes()))
}

fn derive(origin: &Instance, spec: &ProbeSpec) -> Instance {
    Instance {
        id: spec.perturbed_id(&origin.id),
        benchmark: origin.benchmark,
        prompt: origin.prompt.clone(),
        choices: origin.choices.clone(),
        correct: None,
        meta: origin.meta.clone(),
        probe: Some(Lineage::new(spec, origin)),
    }
}

fn lineage_mut(inst: &mut Instance) -> &mut Lineage {
    inst.probe.as_mut().expect("derived instances carry lineage")
}

fn require_label(origin: &Instance) -> Result<usize> {
    origin.correct.ok_or_else(|| Error::MissingLabel { id: origin.id.clone() })
}

pub fn apply_no_question(origin: &Instance, seed: u64) -> Instance {
    let spec = ProbeSpec::no_question(seed);
    let mut out = derive(origin, &spec);
    out.prompt = String::new();
    lineage_mut(&mut out).pseudo_correct = origin.correct;
    out
}

/// Swaps the prompt for one drawn uniformly from other pool instances with a
/// different prompt. With `disjoint`, donors whose prompt shares any token
/// with the origin prompt are excluded as well.
pub fn apply_wrong_question(origin: &Instance, pool: &[Instance], seed: u64, disjoint: bool) -> Result<Instance> {
    let spec = ProbeSpec::wrong_question(seed, disjoint);
    let eligible: Vec<&Instance> = pool
        .iter()
        .filter(|d| d.id != origin.id && d.prompt != origin.prompt)
        .filter(|d| !disjoint || !shares_any_token(&d.prompt, &origin.prompt))
        .collect();
    let mut rng = instance_rng(seed, &origin.id);
    let donor = eligible.choose(&mut rng).ok_or_else(|| Error::NoEligibleDonor {
        id: origin.id.clone(),
        constraint: if disjoint {
            "no other prompt shares zero words with the origin prompt".into()
        } else {
            "no other instance with a different prompt".into()
        },
    })?;
    let mut out = derive(origin, &spec);
    out.prompt = donor.prompt.clone();
    let lineage = lineage_mut(&mut out);
    lineage.donors.push(donor.id.clone());
    lineage.pseudo_correct = origin.correct;
    Ok(out)
}

/// Replaces the correct choice with the correct choice of a uniformly drawn
/// donor. Donors whose correct choice already appears among the origin's
/// choices are skipped so that exactly one position changes.
pub fn apply_no_right_answer(origin: &Instance, pool: &[Instance], seed: u64) -> Result<Instance> {
    let spec = ProbeSpec::no_right_answer(seed);
    let correct = require_label(origin)?;
    let eligible: Vec<(&Instance, &str)> = pool
        .iter()
        .filter(|d| d.id != origin.id)
        .filter_map(|d| d.correct_choice().map(|c| (d, c)))
        .filter(|(_, c)| !origin.choices.iter().any(|o| o == c))
        .collect();
    let mut rng = instance_rng(seed, &origin.id);
    let (donor, text) = eligible.choose(&mut rng).ok_or_else(|| Error::NoEligibleDonor {
        id: origin.id.clone(),
        constraint: "no labeled instance with a distinct correct choice".into(),
    })?;
    let mut out = derive(origin, &spec);
    out.choices[correct] = text.to_string();
    let lineage = lineage_mut(&mut out);
    lineage.donors.push(donor.id.clone());
    lineage.substituted = Some(correct);
    lineage.pseudo_correct = Some(correct);
    Ok(out)
}

/// Builds an `n`-choice instance from the origin's correct choice and the
/// correct choices of `n - 1` distinct donors, in shuffled order.
pub fn apply_choice_paralysis(
    origin: &Instance,
    pool: &[Instance],
    n: usize,
    sampling: Sampling,
    embedder: Option<&EmbeddingProvider>,
    seed: u64,
) -> Result<Instance> {
    let spec = ProbeSpec::choice_paralysis(n, sampling, seed);
    spec.validate(Some(origin.num_choices()))?;
    let correct = require_label(origin)?;
    let eligible: Vec<&Instance> = pool
        .iter()
        .filter(|d| d.id != origin.id)
        .filter(|d| match d.correct_choice() {
            Some(c) => !origin.choices.iter().any(|o| o == c),
            None => false,
        })
        .collect();
    if eligible.len() < n - 1 {
        return Err(Error::NoEligibleDonor {
            id: origin.id.clone(),
            constraint: format!("need {} labeled donors, found {}", n - 1, eligible.len()),
        });
    }

    let mut rng = instance_rng(seed, &origin.id);
    let donors: Vec<&Instance> = match sampling {
        Sampling::Random => {
            rand::seq::index::sample(&mut rng, eligible.len(), n - 1).into_iter().map(|i| eligible[i]).collect()
        }
        Sampling::Heuristic => {
            let embedder =
                embedder.ok_or_else(|| Error::InvalidProbe("heuristic sampling needs an embedding provider".into()))?;
            let candidates: Vec<TextRef<'_>> = eligible.iter().map(|d| TextRef::new(&d.id, &d.prompt)).collect();
            let by_id: HashMap<&str, &Instance> = eligible.iter().map(|d| (d.id.as_str(), *d)).collect();
            embedder
                .rank_by_similarity(TextRef::new(&origin.id, &origin.prompt), &candidates, n - 1)
                .map_err(|e| match e {
                    Error::EmptyText => Error::MissingEmbedding { id: origin.id.clone() },
                    e => e,
                })?
                .iter()
                .map(|id| by_id[id.as_str()])
                .collect()
        }
    };

    // slot 0 is the origin's correct choice, slot i > 0 is donor i - 1
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut out = derive(origin, &spec);
    out.choices = order
        .iter()
        .map(|&slot| match slot {
            0 => origin.choices[correct].clone(),
            s => donors[s - 1].correct_choice().expect("filtered").to_string(),
        })
        .collect();
    let position = order.iter().position(|&s| s == 0).expect("slot 0 present");
    out.correct = Some(position);
    let lineage = lineage_mut(&mut out);
    lineage.donors = order.iter().filter(|&&s| s != 0).map(|&s| donors[s - 1].id.clone()).collect();
    lineage.correct = Some(position);
    Ok(out)
}

fn apply(
    origin: &Instance,
    pool: &[Instance],
    spec: &ProbeSpec,
    embedder: Option<&EmbeddingProvider>,
) -> Result<Instance> {
    match spec.kind {
        ProbeKind::NoQuestion => Ok(apply_no_question(origin, spec.seed)),
        ProbeKind::WrongQuestion => apply_wrong_question(origin, pool, spec.seed, spec.disjoint_prompt),
        ProbeKind::NoRightAnswer => apply_no_right_answer(origin, pool, spec.seed),
        ProbeKind::ChoiceParalysis => apply_choice_paralysis(
            origin,
            pool,
            spec.n.expect("validated"),
            spec.sampling.expect("validated"),
            embedder,
            spec.seed,
        ),
    }
}

/// Perturbs every instance of `set`, drawing donors from the rest of the set.
pub fn perturb_set(set: &InstanceSet, spec: &ProbeSpec, embedder: Option<&EmbeddingProvider>) -> Result<InstanceSet> {
    perturb_with_pool(&set.instances, set, spec, embedder)
}

/// Perturbs `origins` (usually a subsample of `pool`) with donors from `pool`.
/// Output order follows `origins`.
pub fn perturb_with_pool(
    origins: &[Instance],
    pool: &InstanceSet,
    spec: &ProbeSpec,
    embedder: Option<&EmbeddingProvider>,
) -> Result<InstanceSet> {
    let original_choices = pool.benchmark.num_choices().unwrap_or(pool.num_choices);
    spec.validate(Some(original_choices))?;

    // Embed every prompt once rather than once per origin.
    let cache;
    let embedder = match (spec.sampling, embedder) {
        (Some(Sampling::Heuristic), Some(p @ EmbeddingProvider::HashedBow { .. })) => {
            let items = pool
                .iter()
                .chain(origins)
                .filter(|i| !crate::text::tokens(&i.prompt).is_empty())
                .map(|i| TextRef::new(&i.id, &i.prompt));
            cache = p.precompute(items)?;
            Some(&cache)
        }
        (_, e) => e,
    };

    let perturbed = origins
        .par_iter()
        .map(|o| apply(o, &pool.instances, spec, embedder).map_err(|e| e.for_instance(&o.id)))
        .collect::<Result<Vec<_>>>()?;
    InstanceSet::new(pool.benchmark, perturbed)
}

/// Checks the structural guarantees of one perturbed instance against its
/// origin. Returns one message per violated property.
pub fn check_perturbed(origin: &Instance, perturbed: &Instance, pool: &HashMap<&str, &Instance>) -> Vec<String> {
    let mut problems = Vec::new();
    let Some(lineage) = &perturbed.probe else {
        return vec![format!("{}: no probe lineage", perturbed.id)];
    };
    let mut fail = |msg: String| problems.push(format!("{}: {msg}", perturbed.id));
    if lineage.origin != origin.id {
        fail(format!("lineage origin {} != {}", lineage.origin, origin.id));
    }
    match lineage.kind {
        ProbeKind::NoQuestion => {
            if !perturbed.prompt.is_empty() {
                fail("prompt not empty".into());
            }
            if perturbed.choices != origin.choices {
                fail("choices changed".into());
            }
            if lineage.pseudo_correct != origin.correct {
                fail("pseudo-correct index differs from origin label".into());
            }
        }
        ProbeKind::WrongQuestion => {
            if perturbed.choices != origin.choices {
                fail("choices changed".into());
            }
            match lineage.donors.as_slice() {
                [donor] if donor == &origin.id => fail("donor is the origin".into()),
                [donor] => match pool.get(donor.as_str()) {
                    Some(d) if d.prompt == perturbed.prompt => {
                        if lineage.disjoint && shares_any_token(&d.prompt, &origin.prompt) {
                            fail("disjoint donor shares a word with the origin prompt".into());
                        }
                    }
                    Some(_) => fail("prompt is not the donor's prompt".into()),
                    None => fail(format!("unknown donor {donor}")),
                },
                other => fail(format!("expected one donor, found {}", other.len())),
            }
            if lineage.pseudo_correct != origin.correct {
                fail("pseudo-correct index differs from origin label".into());
            }
        }
        ProbeKind::NoRightAnswer => {
            if perturbed.prompt != origin.prompt {
                fail("prompt changed".into());
            }
            let diffs: Vec<usize> = (0..origin.num_choices().max(perturbed.num_choices()))
                .filter(|&i| origin.choices.get(i) != perturbed.choices.get(i))
                .collect();
            if diffs.len() != 1 || Some(diffs[0]) != lineage.substituted {
                fail(format!("changed positions {diffs:?}, recorded {:?}", lineage.substituted));
            }
            if lineage.substituted != origin.correct {
                fail("substituted index is not the origin's correct index".into());
            }
            if lineage.pseudo_correct != lineage.substituted {
                fail("pseudo-correct index != substituted index".into());
            }
            match (lineage.donors.as_slice(), lineage.substituted) {
                ([donor], Some(s)) => match pool.get(donor.as_str()) {
                    Some(d)
                        if d.id != origin.id && d.correct_choice() == perturbed.choices.get(s).map(String::as_str) => {}
                    _ => fail("substituted text is not the donor's correct choice".into()),
                },
                _ => fail("expected one donor".into()),
            }
        }
        ProbeKind::ChoiceParalysis => {
            let n = lineage.n.unwrap_or(0);
            if perturbed.num_choices() != n {
                fail(format!("{} choices, expected {n}", perturbed.num_choices()));
            }
            if perturbed.prompt != origin.prompt {
                fail("prompt changed".into());
            }
            let Some(answer) = origin.correct_choice() else {
                fail("origin unlabeled".into());
                return problems;
            };
            let hits: Vec<usize> =
                perturbed.choices.iter().enumerate().filter(|(_, c)| *c == answer).map(|(i, _)| i).collect();
            if hits.len() != 1 {
                fail(format!("correct choice present {} times", hits.len()));
            } else if perturbed.correct != Some(hits[0]) || lineage.correct != Some(hits[0]) {
                fail("correct index does not point at the correct choice".into());
            }
            for (i, c) in origin.choices.iter().enumerate() {
                if Some(i) != origin.correct && perturbed.choices.contains(c) {
                    fail(format!("original incorrect choice {i} still present"));
                }
            }
            let mut distinct: Vec<&String> = lineage.donors.iter().collect();
            distinct.sort();
            distinct.dedup();
            if lineage.donors.len() != n.saturating_sub(1) || distinct.len() != lineage.donors.len() {
                fail("donors are not n - 1 distinct instances".into());
            }
            if lineage.donors.iter().any(|d| d == &origin.id) {
                fail("origin used as donor".into());
            }
            let mut expected: Vec<&str> =
                lineage.donors.iter().filter_map(|d| pool.get(d.as_str()).and_then(|d| d.correct_choice())).collect();
            let mut actual: Vec<&str> = perturbed
                .choices
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != perturbed.correct)
                .map(|(_, c)| c.as_str())
                .collect();
            expected.sort_unstable();
            actual.sort_unstable();
            if expected != actual {
                fail("other choices are not the donors' correct choices".into());
            }
        }
    }
    problems
}

/// Runs [`check_perturbed`] over a whole perturbed set.
pub fn validate_perturbed_set(origins: &InstanceSet, perturbed: &InstanceSet) -> Vec<String> {
    let pool: HashMap<&str, &Instance> = origins.iter().map(|i| (i.id.as_str(), i)).collect();
    perturbed
        .iter()
        .flat_map(|p| match p.probe.as_ref().and_then(|l| pool.get(l.origin.as_str())) {
            Some(origin) => check_perturbed(origin, p, &pool),
            None => vec![format!("{}: origin not found", p.id)],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Benchmark;

    fn inst(id: &str, prompt: &str, choices: &[&str], correct: Option<usize>) -> Instance {
        Instance {
            id: id.into(),
            benchmark: Benchmark::Synthetic,
            prompt: prompt.into(),
            choices: choices.iter().map(|s| s.to_string()).collect(),
            correct,
            meta: Default::default(),
            probe: None,
        }
    }

    fn pool3() -> Vec<Instance> {
        vec![
            inst("a", "alpha one", &["a0", "a1"], Some(0)),
            inst("b", "beta two", &["b0", "b1"], Some(1)),
            inst("c", "gamma three", &["c0", "c1"], Some(0)),
        ]
    }

    #[test]
    fn no_question_clears_prompt() {
        let o = inst("a", "P", &["h1", "h2"], Some(0));
        let p = apply_no_question(&o, 7);
        assert_eq!(p.prompt, "");
        assert_eq!(p.choices, o.choices);
        assert_eq!(p.correct, None);
        assert_eq!(p.probe.as_ref().unwrap().pseudo_correct, Some(0));
        assert_eq!(p.id, "a/nq/7");
    }

    #[test]
    fn no_question_on_empty_prompt_only_adds_lineage() {
        let o = inst("a", "", &["h1", "h2"], Some(1));
        let p = apply_no_question(&o, 0);
        assert_eq!((p.prompt.as_str(), &p.choices, &p.meta), ("", &o.choices, &o.meta));
    }

    #[test]
    fn wrong_question_is_reproducible() {
        let pool = pool3();
        let a = apply_wrong_question(&pool[0], &pool, 11, false).unwrap();
        let b = apply_wrong_question(&pool[0], &pool, 11, false).unwrap();
        assert_eq!(a, b);
        let donor = &a.probe.as_ref().unwrap().donors[0];
        assert_ne!(donor, "a");
        assert_eq!(a.prompt, pool.iter().find(|d| &d.id == donor).unwrap().prompt);
        assert_eq!(a.choices, pool[0].choices);
    }

    #[test]
    fn disjoint_filter_picks_only_word_free_donor() {
        let origin = inst("o", "a b c", &["x", "y"], Some(0));
        let pool =
            vec![origin.clone(), inst("d1", "a x", &["p", "q"], Some(0)), inst("d2", "y z", &["r", "s"], Some(1))];
        for seed in 0..20 {
            let p = apply_wrong_question(&origin, &pool, seed, true).unwrap();
            assert_eq!(p.prompt, "y z");
        }
    }

    #[test]
    fn wrong_question_needs_another_instance() {
        let origin = inst("o", "p", &["x", "y"], Some(0));
        let err = apply_wrong_question(&origin, std::slice::from_ref(&origin), 0, false).unwrap_err();
        assert!(matches!(err, Error::NoEligibleDonor { .. }));
    }

    #[test]
    fn no_right_answer_swaps_correct_choice() {
        let origin = inst("o", "Kat loved her dog.", &["right", "wrong"], Some(0));
        let donor = inst("d", "Jim went fishing.", &["J", "other"], Some(0));
        let p = apply_no_right_answer(&origin, &[origin.clone(), donor], 3).unwrap();
        assert_eq!(p.choices, ["J", "wrong"]);
        let l = p.probe.as_ref().unwrap();
        assert_eq!(l.substituted, Some(0));
        assert_eq!(l.pseudo_correct, Some(0));
        assert_eq!(l.donors, ["d"]);
        assert_eq!(p.prompt, origin.prompt);
    }

    #[test]
    fn no_right_answer_errors() {
        let unlabeled = inst("o", "p", &["x", "y"], None);
        assert!(matches!(apply_no_right_answer(&unlabeled, &pool3(), 0), Err(Error::MissingLabel { .. })));
        let origin = inst("o", "p", &["x", "y"], Some(0));
        let only_unlabeled = vec![inst("d", "q", &["u", "v"], None)];
        assert!(matches!(apply_no_right_answer(&origin, &only_unlabeled, 0), Err(Error::NoEligibleDonor { .. })));
    }

    fn big_pool(n: usize) -> Vec<Instance> {
        (0..n)
            .map(|i| {
                let c0 = format!("right {i}");
                let c1 = format!("wrong {i}");
                inst(&format!("i{i:02}"), &format!("prompt {i}"), &[&c0, &c1], Some(0))
            })
            .collect()
    }

    #[test]
    fn choice_paralysis_random_structure() {
        let pool = big_pool(12);
        let p = apply_choice_paralysis(&pool[3], &pool, 5, Sampling::Random, None, 9).unwrap();
        assert_eq!(p.num_choices(), 5);
        assert!(!p.choices.contains(&"wrong 3".to_string()));
        assert_eq!(p.choices.iter().filter(|c| *c == "right 3").count(), 1);
        assert_eq!(p.choices[p.correct.unwrap()], "right 3");
        let by_id: HashMap<&str, &Instance> = pool.iter().map(|i| (i.id.as_str(), i)).collect();
        assert!(check_perturbed(&pool[3], &p, &by_id).is_empty());
    }

    #[test]
    fn choice_paralysis_rejects_small_n_and_small_pool() {
        let pool = big_pool(3);
        assert!(matches!(
            apply_choice_paralysis(&pool[0], &pool, 2, Sampling::Random, None, 0),
            Err(Error::InvalidProbe(_))
        ));
        assert!(matches!(
            apply_choice_paralysis(&pool[0], &pool, 5, Sampling::Random, None, 0),
            Err(Error::NoEligibleDonor { .. })
        ));
    }

    #[test]
    fn heuristic_takes_top_cosine_donors() {
        let pool = big_pool(5);
        let vectors = HashMap::from([
            ("i00".to_string(), vec![1.0, 0.0]),
            ("i01".to_string(), vec![0.0, 1.0]),
            ("i02".to_string(), vec![0.9, 0.1]),
            ("i03".to_string(), vec![0.5, 0.5]),
            ("i04".to_string(), vec![-1.0, 0.0]),
        ]);
        let emb = EmbeddingProvider::file_backed(vectors).unwrap();
        // exhaustive cosine ranking vs i00: i02 (0.994) > i03 (0.707) > i01 (0) > i04 (-1)
        for seed in [1, 2, 3] {
            let p = apply_choice_paralysis(&pool[0], &pool, 3, Sampling::Heuristic, Some(&emb), seed).unwrap();
            let mut donors = p.probe.unwrap().donors;
            donors.sort();
            assert_eq!(donors, ["i02", "i03"]);
        }
        let err = apply_choice_paralysis(&pool[0], &pool, 3, Sampling::Heuristic, None, 0);
        assert!(err.is_err());
    }

    #[test]
    fn heuristic_reports_missing_embedding() {
        let pool = big_pool(4);
        let emb = EmbeddingProvider::file_backed(HashMap::from([
            ("i00".to_string(), vec![1.0, 0.0]),
            ("i01".to_string(), vec![0.0, 1.0]),
        ]))
        .unwrap();
        match apply_choice_paralysis(&pool[0], &pool, 3, Sampling::Heuristic, Some(&emb), 0) {
            Err(Error::MissingEmbedding { id }) => assert!(id == "i02" || id == "i03"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ProbeSpec::choice_paralysis(5, Sampling::Random, 0).validate(Some(4)).is_ok());
        assert!(ProbeSpec::choice_paralysis(4, Sampling::Random, 0).validate(Some(4)).is_err());
        let mut bad = ProbeSpec::no_question(0);
        bad.n = Some(5);
        assert!(bad.validate(None).is_err());
        let mut bad = ProbeSpec::no_right_answer(0);
        bad.disjoint_prompt = true;
        assert!(bad.validate(None).is_err());
        assert_eq!("Choice_Paralysis".parse::<ProbeKind>().unwrap(), ProbeKind::ChoiceParalysis);
    }

    #[test]
    fn perturbed_ids_are_unique_per_probe_and_seed() {
        let s = ProbeSpec::choice_paralysis(10, Sampling::Heuristic, 42);
        assert_eq!(s.perturbed_id("x"), "x/cp10h/42");
        assert_eq!(ProbeSpec::wrong_question(1, true).perturbed_id("x"), "x/wqd/1");
    }

    #[test]
    fn perturb_set_preserves_order_and_is_deterministic() {
        let pool = big_pool(10);
        let set = InstanceSet::new(Benchmark::Synthetic, pool).unwrap();
        for spec in [
            ProbeSpec::no_question(5),
            ProbeSpec::wrong_question(5, false),
            ProbeSpec::no_right_answer(5),
            ProbeSpec::choice_paralysis(4, Sampling::Random, 5),
        ] {
            let a = perturb_set(&set, &spec, None).unwrap();
            let b = perturb_set(&set, &spec, None).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 10);
            for (o, p) in set.iter().zip(a.iter()) {
                assert_eq!(p.probe.as_ref().unwrap().origin, o.id);
            }
            assert!(validate_perturbed_set(&set, &a).is_empty(), "{spec:?}");
        }
    }

    #[test]
    fn perturb_set_annotates_failing_instance() {
        let mut pool = big_pool(3);
        pool[1].correct = None;
        let set = InstanceSet::new(Benchmark::Synthetic, pool).unwrap();
        match perturb_set(&set, &ProbeSpec::no_right_answer(0), None).unwrap_err() {
            Error::Instance { id, .. } => assert_eq!(id, "i01"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn validator_flags_tampering() {
        let pool = big_pool(6);
        let by_id: HashMap<&str, &Instance> = pool.iter().map(|i| (i.id.as_str(), i)).collect();
        let mut p = apply_no_right_answer(&pool[0], &pool, 1).unwrap();
        p.choices[1] = "tampered".into();
        assert!(!check_perturbed(&pool[0], &p, &by_id).is_empty());

        let mut p = apply_choice_paralysis(&pool[0], &pool, 4, Sampling::Random, None, 1).unwrap();
        let wrong = pool[0].choices[1].clone();
        let slot = (p.correct.unwrap() + 1) % 4;
        p.choices[slot] = wrong;
        assert!(!check_perturbed(&pool[0], &p, &by_id).is_empty());
    }
}
