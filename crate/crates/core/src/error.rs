//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("container format error: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trial set contains only one class")]
    SingleClass,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("epoch window out of bounds for event {event_index}: samples {start}..{end} outside recording of length {n_samples}")]
    EpochOutOfBounds {
        event_index: usize,
        start: i64,
        end: i64,
        n_samples: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
