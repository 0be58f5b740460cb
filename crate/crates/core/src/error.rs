use colsod_autograd::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter file: {0}")]
    Format(String),
    #[error("{term} is not finite ({value})")]
    NonFinite { term: &'static str, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn config(msg: impl Into<String>) -> CoreError {
    CoreError::Config(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> CoreError {
    CoreError::Shape(msg.into())
}
