//! Seeded synthetic corpora.
//!
//! Words are pronounceable nonsense built from syllables, so prompts drawn
//! from a large vocabulary rarely share tokens and every probe (including
//! the disjoint Wrong-Question variant) finds donors.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Benchmark, Instance, InstanceSet};
use crate::error::{Error, Result};

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 6] = ["", "n", "r", "l", "s", "k"];

/// Tokens every prompt of [`lexical_bias`] contains.
pub const SHARED_TOKENS: [&str; 3] = ["the", "of", "and"];

pub fn vocabulary(size: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut words = BTreeSet::new();
    while words.len() < size {
        let syllables = rng.random_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| {
                format!("{}{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap(), CODAS.choose(rng).unwrap())
            })
            .collect();
        words.insert(w);
    }
    let mut v: Vec<String> = words.into_iter().collect();
    // BTreeSet order is alphabetical; shuffle so word index carries no signal
    rand::seq::SliceRandom::shuffle(v.as_mut_slice(), rng);
    v
}

fn phrase(vocab: &[String], len: usize, rng: &mut impl Rng) -> String {
    (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
}

fn check_args(instances: usize, choices: usize) -> Result<()> {
    if instances == 0 || choices < 2 {
        return Err(Error::InvalidArgument(format!(
            "synthetic corpus needs >= 1 instance and >= 2 choices, got {instances} and {choices}"
        )));
    }
    Ok(())
}

fn instance(idx: usize, prompt: String, choices: Vec<String>, correct: usize) -> Instance {
    Instance {
        id: format!("syn-{idx:05}"),
        benchmark: Benchmark::Synthetic,
        prompt,
        choices,
        correct: Some(correct),
        meta: Default::default(),
        probe: None,
    }
}

/// Distinct choices within an instance; correct-choice texts unique across
/// the corpus.
fn distinct_choices(
    vocab: &[String],
    n: usize,
    used_correct: &mut BTreeSet<String>,
    rng: &mut impl Rng,
) -> (Vec<String>, usize) {
    let correct = rng.random_range(0..n);
    let mut choices: Vec<String> = Vec::with_capacity(n);
    while choices.len() < n {
        let len = rng.random_range(2..=6);
        let c = phrase(vocab, len, rng);
        if choices.contains(&c) || (choices.len() == correct && used_correct.contains(&c)) {
            continue;
        }
        choices.push(c);
    }
    used_correct.insert(choices[correct].clone());
    (choices, correct)
}

/// A labeled corpus with random prompts, choices and answer positions.
pub fn generate(instances: usize, choices: usize, seed: u64) -> Result<InstanceSet> {
    check_args(instances, choices)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(2000, &mut rng);
    let mut used = BTreeSet::new();
    let out = (0..instances)
        .map(|i| {
            let plen = rng.random_range(6..=10);
            let prompt = phrase(&vocab, plen, &mut rng);
            let (c, k) = distinct_choices(&vocab, choices, &mut used, &mut rng);
            instance(i, prompt, c, k)
        })
        .collect();
    InstanceSet::new(Benchmark::Synthetic, out)
}

/// A corpus built so a word-overlap scorer is biased: every prompt contains
/// [`SHARED_TOKENS`], each correct choice repeats them, and each distractor
/// reuses three words of its own prompt. Swapping in another prompt leaves
/// the correct choice with all its overlap and strips the distractors of
/// theirs.
pub fn lexical_bias(instances: usize, choices: usize, seed: u64) -> Result<InstanceSet> {
    check_args(instances, choices)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(4000, &mut rng);
    let out = (0..instances)
        .map(|i| {
            let own: Vec<String> = vocab.choose_multiple(&mut rng, 8).cloned().collect();
            let mut prompt_words: Vec<&str> = own.iter().map(String::as_str).collect();
            prompt_words.extend(SHARED_TOKENS);
            rand::seq::SliceRandom::shuffle(prompt_words.as_mut_slice(), &mut rng);
            let prompt = prompt_words.join(" ");

            let correct = rng.random_range(0..choices);
            let choices = (0..choices)
                .map(|j| {
                    let filler = phrase(&vocab, 2, &mut rng);
                    if j == correct {
                        format!("{} {filler} {i}", SHARED_TOKENS.join(" "))
                    } else {
                        let picked: Vec<&str> = own.choose_multiple(&mut rng, 3).map(String::as_str).collect();
                        format!("{} {filler} {i}x{j}", picked.join(" "))
                    }
                })
                .collect();
            instance(i, prompt, choices, correct)
        })
        .collect();
    InstanceSet::new(Benchmark::Synthetic, out)
}
