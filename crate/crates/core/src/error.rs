//! Shared error type for the core library.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by trace I/O, signal processing, and configuration loading.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed line in a trace, template, rule, or script file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally valid input that violates a format contract
    /// (non-uniform sampling, out-of-range values, misaligned receivers).
    #[error("format error: {0}")]
    Format(String),

    /// An input with no usable data.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// An argument outside an operation's domain (signal too short,
    /// non-finite samples, invalid level count).
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario script or configuration that fails validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
