//! Confusion probes for multiple-choice scorers.
//!
//! The crate loads multiple-choice benchmarks into a canonical form,
//! perturbs them so that the question, the right answer or the choice set
//! changes, scores both versions with a pluggable [`Scorer`], and measures
//! how the scorer's confidence moves. It also contains a max-probability
//! detector for perturbed instances and a dataset audit for annotation
//! artifacts.

pub mod audit;
pub mod calibration;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod probes;
pub mod runner;
pub mod scoring;
pub mod simtext;
pub mod synthetic;
pub mod text;

pub use corpus::{load_benchmark, read_canonical, write_canonical, Benchmark, Instance, InstanceSet};
pub use error::{Error, Result};
pub use probes::{perturb_set, Lineage, ProbeKind, ProbeSpec, Sampling};
pub use scoring::{ConfidenceSet, Scorer, ScorerSpec};
pub use simtext::EmbeddingProvider;
