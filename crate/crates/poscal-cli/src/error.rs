//! CLI error type with the process exit codes it maps to.

use thiserror::Error;

/// Errors surfaced by the command-line toolkit.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration (bad flag value, missing column, inconsistent
    /// settings). Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// A data file failed to open or parse. Exit code 3.
    #[error("ingestion error at line {line}: {msg}")]
    Ingestion { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] poscal::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn ingestion(line: usize, msg: impl Into<String>) -> Self {
        CliError::Ingestion {
            line,
            msg: msg.into(),
        }
    }

    /// 0 success, 2 config error, 3 ingestion error, 4 training diverged;
    /// anything else is 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ingestion { .. } | CliError::Csv(_) => 3,
            CliError::Core(poscal::Error::Diverged { .. }) => 4,
            CliError::Core(poscal::Error::InvalidInput(_)) => 2,
            CliError::Io(_) | CliError::Serde(_) => 1,
        }
    }
}
