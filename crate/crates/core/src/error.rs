// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the change-point toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data or indices.
    #[error("invalid input: {0}")]
    Input(String),
    /// A tuning parameter or configuration value is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A numerical procedure could not produce a trustworthy result.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A scan interval leaves no admissible split after trimming.
    #[error("interval ({s}, {e}] too short for trimming {trim}")]
    IntervalTooShort { s: usize, e: usize, trim: usize },
    /// Tabular data could not be parsed.
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
