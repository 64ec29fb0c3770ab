use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing input file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic in {}", .0.display())]
    BadMagic(PathBuf),

    #[error("truncated payload in {}: expected {expected} bytes, found {found}", path.display())]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("array rank {0} exceeds the maximum of 4")]
    RankTooLarge(usize),

    #[error("wav error in {}: {msg}", path.display())]
    Wav { path: PathBuf, msg: String },

    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("no auditory object among the detections")]
    NoAuditoryObject,

    #[error("rank-deficient reference set")]
    RankDeficient,

    #[error("window {window}: {source}")]
    InWindow {
        window: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Wraps the error with the index of the window that produced it.
    pub fn in_window(self, window: usize) -> Self {
        Error::InWindow {
            window,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a referenced file that does not exist.
    pub fn is_missing_input(&self) -> bool {
        match self {
            Error::MissingFile(_) => true,
            Error::InWindow { source, .. } => source.is_missing_input(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
