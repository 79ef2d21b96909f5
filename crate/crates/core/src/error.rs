use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: no records")]
    NoRecords { path: PathBuf },

    #[error("record/label count mismatch: {records} records, {labels} labels")]
    LabelCount { records: usize, labels: usize },

    #[error("missing field `{field}`")]
    MissingField { field: String },

    #[error("schema violation in record `{id}`: {message}")]
    Schema { id: String, message: String },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("instance `{id}`: no eligible donor ({constraint})")]
    NoEligibleDonor { id: String, constraint: String },

    #[error("instance `{id}` has no label")]
    MissingLabel { id: String },

    #[error("no embedding for instance `{id}`")]
    MissingEmbedding { id: String },

    #[error("text has no tokens")]
    EmptyText,

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid confidences: {0}")]
    InvalidConfidences(String),

    #[error("no score for instance `{id}`")]
    MissingScore { id: String },

    #[error("remote batch {batch}: {message}")]
    Remote { batch: usize, message: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance `{id}`: {source}")]
    Instance {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn for_instance(self, id: &str) -> Self {
        match self {
            // already annotated
            e @ Error::Instance { .. } => e,
            e => Error::Instance { id: id.to_string(), source: Box::new(e) },
        }
    }
}
