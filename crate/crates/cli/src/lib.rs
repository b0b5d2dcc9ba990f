//! Library surface of the qplab command-line tool. The binary is a thin
//! wrapper; everything testable lives here, including the full
//! verification suite.

pub mod commands;
pub mod config;
pub mod out;
pub mod verify;

/// How a command run ended, for exit-code mapping: configuration problems
/// exit 2, failed checks or runtime errors exit 1, clean passes exit 0.
#[derive(Clone, Debug)]
pub enum Outcome {
    Pass,
    CheckFailed(String),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage: exit code 2.
    Config(String),
    /// A computation failed at runtime: exit code 1.
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qplab_core::Error> for CliError {
    fn from(err: qplab_core::Error) -> Self {
        CliError::Run(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Run(format!("io: {err}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
