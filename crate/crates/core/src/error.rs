use thiserror::Error;

use crate::tensor::Shape4;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("unsupported shape {shape} for {op}: spatial dims must be powers of two")]
    UnsupportedShape { op: &'static str, shape: Shape4 },

    #[error("invalid crop to {h}x{w} from {shape}")]
    InvalidCrop { shape: Shape4, h: usize, w: usize },

    #[error("invalid pad to {h}x{w} from {shape}")]
    InvalidPad { shape: Shape4, h: usize, w: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("layer state error: {0}")]
    State(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot build linear counterpart: {0}")]
    Transform(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}
