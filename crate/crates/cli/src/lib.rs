//! Library half of the `multigen` command: configuration, the verification
//! grid, the subcommands and their table and plot output.

pub mod checks;
pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use multigen_core::Error;

/// Everything a subcommand can fail with, mapped onto the exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },

    #[error("verification failed: {failed} of {total} checks")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    /// 1 verification failure, 2 usage or configuration, 3 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidParams(_)
                | Error::NonStationary { .. }
                | Error::Infeasible { .. }
                | Error::Degenerate(_)
                | Error::NotPsd { .. }
                | Error::BadScenarioParams(_) => 2,
                _ => 3,
            },
            CliError::Output { .. } => 3,
        }
    }
}
