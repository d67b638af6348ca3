//! Command implementations behind the `nnbo` binary.

pub mod bench;
pub mod config;
pub mod logfile;
pub mod report;
pub mod run;

use config::ConfigError;

/// Failure of a CLI command, mapped onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("incompatible input: {0}")]
    Incompatible(String),
    #[error("{0}")]
    EvaluatorFatal(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Incompatible(_) => 2,
            CliError::EvaluatorFatal(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}
