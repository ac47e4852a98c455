use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown learner kind `{0}`")]
    UnknownLearner(String),

    #[error("training diverged (learning rate {learning_rate:e}): loss became non-finite")]
    Divergence { learning_rate: f64 },

    #[error("no out-of-bag rows available for importance estimation")]
    NoOobRows,

    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad input or configuration rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Parse { .. }
                | Error::EmptyInput(_)
                | Error::UnknownLabel(_)
                | Error::InvalidConfig(_)
                | Error::UnknownLearner(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
