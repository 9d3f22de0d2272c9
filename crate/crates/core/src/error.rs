use std::path::PathBuf;

/// Errors raised by the geometry, detection, optimization and I/O layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("invalid depth {0}: must be positive and finite")]
    InvalidDepth(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("not enough samples: needed {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },
    #[error("seed sets differ between reports")]
    SeedMismatch,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
