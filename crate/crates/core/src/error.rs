use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input vector has zero norm")]
    ZeroNormInput,
    #[error("input list is empty")]
    EmptyInput,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("duplicate record id `{0}`")]
    DuplicateRecordId(String),
    #[error("invalid length-of-stay class {0} (expected 1..=5)")]
    InvalidClass(i64),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("minority class has {found} samples, SMOTE needs more than k = {k}")]
    TooFewMinoritySamples { found: usize, k: usize },
    #[error("batch has {0} views, the contrastive loss needs at least 4")]
    BatchTooSmall(usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite activation in layer {0}")]
    NonFiniteActivation(usize),
    #[error("non-finite gradient in layer {0}")]
    NonFiniteGradient(usize),
    #[error("standard deviation {0:e} is below 1e-12; embeddings look collapsed")]
    ZeroVariance(f64),
    #[error("record `{0}` is present in both the training and the evaluation rows")]
    Leakage(String),
    #[error("model has not been fitted")]
    NotFitted,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) | Error::Csv(_) | Error::Checkpoint(_) => ErrorKind::Io,
            Error::Parse { .. }
            | Error::DuplicateRecordId(_)
            | Error::InvalidClass(_)
            | Error::InvalidConfig(_)
            | Error::DegenerateSplit(_)
            | Error::Json(_)
            | Error::Toml(_) => ErrorKind::Config,
            _ => ErrorKind::Numerical,
        }
    }
}
