use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("solver failed: {0}")]
    Solver(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    /// 2 for usage and I/O problems, 3 for solver failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

/// Data and parameter errors are the caller's fault; anything raised while
/// iterating is a solver failure.
impl From<dcprox::Error> for CliError {
    fn from(e: dcprox::Error) -> Self {
        use dcprox::Error as E;
        match e {
            E::Io { .. } | E::Parse { .. } | E::LabelAlphabet { .. } => Self::Io(e.to_string()),
            E::InvalidParameter(_) | E::InvalidMatrix(_) | E::DimensionMismatch { .. } | E::Unsupported(_) => {
                Self::Usage(e.to_string())
            }
            E::NonFinite(_) | E::InnerDiverged | E::StepSearchFailed { .. } => Self::Solver(e.to_string()),
        }
    }
}
