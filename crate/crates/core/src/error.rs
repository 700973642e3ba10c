use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: inconsistent label alphabet {labels:?} (expected {{-1,+1}} or {{0,1}})")]
    LabelAlphabet { path: PathBuf, labels: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("inner solver produced a non-finite iterate (ill-conditioned metric?)")]
    InnerDiverged,

    #[error("{solver}: step search failed at iteration {iteration} after {attempts} reductions")]
    StepSearchFailed {
        solver: &'static str,
        iteration: usize,
        attempts: usize,
    },

    #[error("solver does not support this penalty: {0}")]
    Unsupported(&'static str),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn check_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
