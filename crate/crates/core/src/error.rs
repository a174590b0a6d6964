use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed sample name {name:?}: {reason}")]
    MalformedName { name: String, reason: &'static str },

    #[error("invalid count {requested} (must satisfy {constraint})")]
    InvalidCount {
        requested: usize,
        constraint: String,
    },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid top-n request n={n} for {classes} classes")]
    InvalidN { n: usize, classes: usize },

    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,

    #[error("k={k} exceeds the {available} available training samples")]
    KTooLarge { k: usize, available: usize },

    #[error("group {date:?} still has {remaining} unlabeled samples after {rounds} rounds")]
    MaxRoundsExceeded {
        date: String,
        rounds: usize,
        remaining: usize,
    },

    #[error("group {date:?} has {count} test samples without a pseudo-label")]
    UnlabeledTestSamples { date: String, count: usize },

    #[error("no branch for date {0:?}")]
    UnknownDate(String),

    #[error("evaluation set is empty")]
    EmptyEvaluationSet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
