use std::fmt;
use std::io;

/// Failure classes, one per nonzero exit code.
#[derive(Debug)]
pub enum CliError {
    /// Rejected before any work started: malformed config, bad arguments,
    /// an empty glob. Exit code 1.
    Validation(String),
    /// Failure mid-run: IO, an instance too large for the oracle, a learner
    /// error. Partial results stay on disk. Exit code 2.
    Runtime(String),
    /// A certification suite measured something out of bounds. Exit code 3.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
            CliError::Verification(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
