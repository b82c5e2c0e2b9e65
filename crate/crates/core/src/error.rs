//! Crate-wide error type.

use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands (image/field/kernel) disagree on dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// NaN or infinity where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Operation needs at least one frame.
    #[error("empty sequence")]
    EmptySequence,

    /// File exists but is not a format we can read.
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    /// File ended early or its contents are inconsistent with the header.
    #[error("truncated or corrupt image file {path}: {detail}")]
    CorruptFile { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// External restorer exited with a nonzero status.
    #[error("external restorer exited with status {status}")]
    ExternalFailed { status: i32, log: PathBuf },

    /// External restorer exceeded its wall-clock budget and was killed.
    #[error("external restorer timed out after {0:?}")]
    ExternalTimeout(Duration),

    /// External restorer exited 0 but did not produce the output image.
    #[error("external restorer produced no output at {0}")]
    ExternalMissingOutput(PathBuf),

    #[error("malformed CSV at {path}:{line}: {detail}")]
    MalformedCsv {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn dims(detail: impl Into<String>) -> Self {
        Error::DimensionMismatch(detail.into())
    }

    pub(crate) fn arg(detail: impl Into<String>) -> Self {
        Error::InvalidArgument(detail.into())
    }

    /// Wrap an i/o error with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
