use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] colsod_core::CoreError),
    #[error(transparent)]
    Data(#[from] colsod_data::DataError),
    #[error(transparent)]
    Metric(#[from] colsod_metrics::MetricError),
    #[error(transparent)]
    Tensor(#[from] colsod_autograd::TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("{bytes} bytes of depth were read on a depth-free path")]
    DepthRead { bytes: u64 },
    #[error("gradient check failed for {0}")]
    GradCheck(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Attaches the path to an I/O error.
pub(crate) fn file(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::File { path, source }
}
