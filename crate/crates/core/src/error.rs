//! Error taxonomy shared across the crate.
//!
//! `Usage` marks a caller mistake (bad argument, malformed input file) and
//! maps to exit code 2 in the CLI; `Numeric` marks a computation that failed
//! to meet its own tolerance (for example an eigensolve that did not
//! converge) and maps to exit code 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("numeric: {0}")]
    Numeric(String),

    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
