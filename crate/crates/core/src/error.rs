//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used by every fallible API in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem-level failure, annotated with the offending path.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed corpus record. `line` is 1-based within the input stream.
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    /// Invalid configuration or parameter value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A model file that does not parse as what it claims to be.
    #[error("corrupt model file: {0}")]
    Corrupt(String),

    /// A model file written by a newer, unsupported format revision.
    #[error("unsupported model format version {found} (this build reads up to {supported})")]
    Version { found: u32, supported: u32 },

    /// An operation that needs at least one input got none.
    #[error("empty input stream")]
    EmptyStream,

    /// Too little data to fit a model.
    #[error("need at least {needed} training pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },

    /// A relevance classifier failed to produce a probability.
    #[error("classifier: {0}")]
    Classifier(String),

    /// A next-token scorer violated its contract or lacked required data.
    #[error("scorer: {0}")]
    Scorer(String),
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Shorthand for a malformed-record error.
    pub fn record(line: usize, message: impl Into<String>) -> Self {
        Error::Record { line, message: message.into() }
    }
}
