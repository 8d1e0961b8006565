//! Experiment driver: configs, named recipes, the solve-and-check pipeline,
//! parameter sweeps and the JSON report.

pub mod config;
pub mod pipeline;
pub mod recipe;
pub mod report;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("solver failed: {0}")]
    SolveFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<nemfilm_core::io::IoError> for HarnessError {
    fn from(e: nemfilm_core::io::IoError) -> Self {
        match e {
            nemfilm_core::io::IoError::Io(e) => HarnessError::Io(e),
            other => HarnessError::Io(std::io::Error::other(other.to_string())),
        }
    }
}

/// Process exit code when the run finished but a check failed.
pub const EXIT_CHECK_FAILED: i32 = 4;

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ConfigInvalid(_) => 2,
            HarnessError::SolveFailed(_) => 3,
            HarnessError::Io(_) => 1,
        }
    }
}
