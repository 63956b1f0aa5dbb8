//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Array shapes that were required to agree do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numeric input violates its domain (non-finite, wrong sign, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A video or tensor has fewer frames than the operation needs.
    #[error("insufficient frames: need at least {needed}, got {got}")]
    InsufficientFrames { needed: usize, got: usize },

    /// A transition grouping does not partition the available transitions.
    #[error("invalid grouping: {0}")]
    Partition(String),

    /// Operation not defined for the tensor's mode.
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    /// Events out of timestamp order.
    #[error("ordering error: {0}")]
    Ordering(String),

    /// Malformed text input; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Coordinates outside the declared sensor.
    #[error("bounds error: {0}")]
    Bounds(String),

    /// Binary or textual container violates its format.
    #[error("format error: {0}")]
    Format(String),

    /// Payload shorter or longer than the header promises.
    #[error("length error: {0}")]
    Length(String),

    /// Bad key or value in a configuration file.
    #[error("config error: {0}")]
    Config(String),

    /// Problem pieces that must agree (frame counts, shapes) do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Invalid scalar parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The objective became non-finite during optimization.
    #[error("objective diverged (non-finite) at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
