use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty context: at least one record is required")]
    EmptyContext,
    #[error("inconsistent embeddings in sample `{sample_id}`: {reason}")]
    InconsistentEmbeddings { sample_id: String, reason: String },
    #[error("ensemble too small: {m} generators, at least 3 are required")]
    EnsembleTooSmall { m: usize },
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("degenerate triplet ({i}, {j}, {k}): indices must be pairwise distinct and below {m}")]
    DegenerateTriplet { i: usize, j: usize, k: usize, m: usize },
    #[error("neighborhood too large: n0 = {n0} but only {available} neighbors are available")]
    NeighborhoodTooLarge { n0: usize, available: usize },
    #[error("neighborhood size must be positive")]
    EmptyNeighborhood,
    #[error("empty training pool")]
    EmptyTrainPool,
    #[error("sample `{0}` has no input key")]
    MissingInputKey(String),
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("unknown sample id `{0}`")]
    UnknownId(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k = {k} exceeds the {available} candidates available")]
    KTooLarge { k: usize, available: usize },
    #[error("invalid theta: {0}")]
    InvalidTheta(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("spearman correlation is undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("empty validation set")]
    EmptyValidationSet,
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn inconsistent(sample_id: &str, reason: impl Into<String>) -> Self {
        Error::InconsistentEmbeddings { sample_id: sample_id.to_owned(), reason: reason.into() }
    }
}
