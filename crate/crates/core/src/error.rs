use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ScslError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ScslError {
    #[error("row count mismatch: X has {x_rows} rows, Y has {y_rows} rows")]
    MismatchedRows { x_rows: usize, y_rows: usize },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("parse error in {file} at line {line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("duplicate column label `{0}`")]
    DuplicateColumn(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mask shape error: expected length {expected}, got {got}")]
    MaskShape { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate likelihood: all categorical weights are non-finite")]
    DegenerateLikelihood,

    #[error("non-finite training loss at epoch {epoch} (learning rate too large?)")]
    NonFiniteLoss { epoch: usize },

    #[error("degenerate variance: residual products are constant ({value})")]
    DegenerateVariance { value: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl ScslError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ScslError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ScslError::Config(msg.into())
    }
}
