//! Failure classes of a command and their exit codes.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// An enabled check failed; exit code 1.
    Assertion(String),
    /// Invalid configuration or input; exit code 2.
    Config(String),
    /// Numerical breakdown; exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Assertion(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<scri_core::Error> for CliError {
    fn from(e: scri_core::Error) -> Self {
        use scri_core::Error as E;
        match e {
            E::Config(_) | E::Parse(_) => CliError::Config(e.to_string()),
            E::InsufficientSamples(_) => CliError::Assertion(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
