use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HydraError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HydraError {
    #[error("series length mismatch: expected {expected}, found {found}{}", line_suffix(*.line))]
    LengthMismatch {
        expected: usize,
        found: usize,
        line: Option<usize>,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate labels: need at least 2 classes, found {0}")]
    DegenerateLabels(usize),

    #[error("series too short: length {length}, minimum {minimum}")]
    SeriesTooShort { length: usize, minimum: usize },

    #[error("degenerate kernel: all weights equal after centering")]
    DegenerateKernel,

    #[error("bank/model mismatch: {0}")]
    BankMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in input: {0}")]
    NonFiniteInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no datasets common to every variant")]
    NoCommonDatasets,

    #[error("unknown class label {0:?}")]
    UnknownLabel(String),

    #[error("malformed container {path:?}: {message}")]
    Container { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl HydraError {
    /// Errors caused by the run configuration rather than the input data.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HydraError::InvalidConfig(_) | HydraError::InsufficientData(_)
        )
    }
}
