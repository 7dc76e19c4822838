use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParam { field: String, message: String },

    #[error("cannot add {requested} edges: only {available} absent user-assertion pairs")]
    NotEnoughAbsentPairs { requested: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("training diverged: non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("oracle refused node {node}: {reason}")]
    Oracle { node: String, reason: &'static str },

    #[error("budget {budget} exceeds candidate pool of {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },

    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
