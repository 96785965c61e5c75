use std::path::PathBuf;

use reactmix::{IoError, SolverError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] IoError),
    #[error("invalid configuration: {0}")]
    Config(SolverError),
    #[error("{path}: {reason}")]
    Output { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("solver aborted: {0}")]
    Aborted(SolverError),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) | Self::Config(_) | Self::Output { .. } | Self::Usage(_) => 1,
            Self::Aborted(_) => 2,
            Self::Verification(_) => 3,
        }
    }

    pub fn output(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Self::Output {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
