//! Word-level text helpers shared by the disjoint-prompt filter, the lexical
//! scorer, the hashed embeddings and the audit.
//!
//! A token is a whitespace-separated word, lowercased, with every
//! non-alphanumeric character removed. Words that are pure punctuation vanish.

use std::collections::BTreeSet;

pub fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().collect()
}

/// Number of whitespace-separated words, case and punctuation untouched.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Number of distinct tokens of `a` that also occur in `b`.
pub fn overlap_count(a: &str, b: &str) -> usize {
    let b = token_set(b);
    token_set(a).intersection(&b).count()
}

pub fn shares_any_token(a: &str, b: &str) -> bool {
    overlap_count(a, b) > 0
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}
