use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no edges at or before snapshot time {0}")]
    EmptySnapshot(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("statistics provenance check failed: {0}")]
    Provenance(String),

    #[error("split ordering violated: {0}")]
    SplitOrder(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Numerical(_) | Error::Singular(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
