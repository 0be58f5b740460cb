use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    /// A file is missing, unreadable or fails to decode.
    #[error("cannot ingest {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },
    #[error("invalid data: {0}")]
    Validation(String),
    #[error("depth of `{0}` was requested by a loader that skips depth")]
    DepthSkipped(String),
    #[error("manifest cache {path} line {line}: {reason}")]
    Cache { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, DataError>;

pub(crate) fn ingestion(path: impl Into<PathBuf>, reason: impl ToString) -> DataError {
    DataError::Ingestion {
        path: path.into(),
        reason: reason.to_string(),
    }
}
