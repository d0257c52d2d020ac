use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ingestion error in {path}: {message}")]
    Ingestion { path: PathBuf, message: String },
    #[error("{path}: row {row}, column '{column}': {message}")]
    Cell {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("problem {problem}: {message}")]
    Problem { problem: String, message: String },
    #[error("hyperparameter {name}={value} outside domain [{min}, {max}]")]
    Domain {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("not enough points: need {needed}, have {available}")]
    TooFewPoints { needed: usize, available: usize },
    #[error("SMO solver did not converge after {iterations} iterations (max KKT violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },
    #[error("no usable validation fold: every fold lacks negatives or targets")]
    NoUsableFold,
    #[error("statistics: {0}")]
    Stats(String),
    #[error("record grid mismatch, missing keys: {0:?}")]
    GridMismatch(Vec<String>),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
