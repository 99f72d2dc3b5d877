use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("frame {frame}: expected 10 points, found {found}")]
    PointCount { frame: u64, found: usize },

    #[error("frame {frame}, point {point}: {field} = {value} is outside [0, 1]")]
    OutOfRange {
        frame: u64,
        point: usize,
        field: &'static str,
        value: f64,
    },

    #[error("line {line}: frame index {found} does not follow {previous}")]
    FrameOrder {
        line: usize,
        previous: u64,
        found: u64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("model format version {found} is not supported (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error("corrupt model file: {0}")]
    Corrupt(String),
}
