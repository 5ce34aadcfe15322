//! Error type shared by every module in the crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the training toolkit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An input violated a documented precondition (shape mismatch,
    /// out-of-range value, non-finite number, inconsistent configuration).
    InvalidInput(String),
    /// Training produced a non-finite loss or parameter value at the given
    /// global step (1-based).
    Diverged { step: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Diverged { step } => write!(f, "training diverged at step {step}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
