use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("payload length mismatch: header implies {expected} bytes, file has {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("cannot extract direction for feature `{feature}`: {reason}")]
    Extraction { feature: String, reason: String },

    #[error("degenerate direction for feature `{0}`: mean difference has vanishing norm")]
    DegenerateDirection(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("capability error: {0}")]
    Capability(String),
}

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Data,
    Endpoint,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Transport(_) | Error::Protocol(_) | Error::Capability(_) => ErrorKind::Endpoint,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
