use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration. Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while running a valid configuration. Exit code 1.
    #[error("runtime error: {0}")]
    Runtime(String),
    /// A verification command ran but a check failed. Exit code 1.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) | CliError::CheckFailed(_) => ExitCode::from(1),
        }
    }
}

impl From<mtm_core::Error> for CliError {
    fn from(e: mtm_core::Error) -> Self {
        use mtm_core::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Usage(_) | E::Dimension { .. } | E::EnumerationTooLarge { .. } => {
                CliError::Config(e.to_string())
            }
            E::Invariant(_) | E::Step { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
