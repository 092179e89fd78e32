use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library and the command line can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("logits contain a non-finite value at index {index}")]
    InvalidLogits { index: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid shape: {0}")]
    ShapeError(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("pooling kernel {kernel} exceeds the {rows} available rows")]
    KernelTooLarge { kernel: usize, rows: usize },
    #[error("at least 2 rows are required for a sample standard deviation, got {rows}")]
    InsufficientRows { rows: usize },
    #[error("at least 2 ensemble members are required, got {members}")]
    InsufficientMembers { members: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid temperature {0}")]
    InvalidTemperature(f64),
    #[error("validation set is empty or too small")]
    EmptyValidationSet,
    #[error("label {label} is outside [0, {classes})")]
    InvalidLabel { label: usize, classes: usize },
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("{path}:{line}: malformed header: {reason}")]
    MalformedHeader {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: row count mismatch: {reason}")]
    RowCountMismatch {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: non-finite or unparsable value {token:?}")]
    NonFiniteValue {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Stable machine-readable code, printed by the command line on failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidLogits { .. } => "INVALID_LOGITS",
            Error::EmptyInput => "EMPTY_INPUT",
            Error::ShapeError(_) => "SHAPE_ERROR",
            Error::InvalidProbabilities(_) => "INVALID_PROBABILITIES",
            Error::KernelTooLarge { .. } => "KERNEL_TOO_LARGE",
            Error::InsufficientRows { .. } => "INSUFFICIENT_ROWS",
            Error::InsufficientMembers { .. } => "INSUFFICIENT_MEMBERS",
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::InvalidTemperature(_) => "INVALID_TEMPERATURE",
            Error::EmptyValidationSet => "EMPTY_VALIDATION_SET",
            Error::InvalidLabel { .. } => "INVALID_LABEL",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::EmptyEvaluationSet => "EMPTY_EVALUATION_SET",
            Error::InvalidSpec(_) => "INVALID_SPEC",
            Error::EmptyDataset => "EMPTY_DATASET",
            Error::ConfigError(_) => "CONFIG_ERROR",
            Error::MalformedHeader { .. } => "MALFORMED_HEADER",
            Error::RowCountMismatch { .. } => "ROW_COUNT_MISMATCH",
            Error::NonFiniteValue { .. } => "NON_FINITE_VALUE",
            Error::Io { .. } => "IO_ERROR",
            Error::Json { .. } => "JSON_ERROR",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
