use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format at byte {offset}: {found}")]
    UnsupportedFormat { offset: usize, found: String },

    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },

    #[error("truncated payload at byte {offset}: expected {expected} more bytes")]
    TruncatedPayload { offset: usize, expected: usize },

    #[error("invalid sample at byte {offset}: {reason}")]
    InvalidSample { offset: usize, reason: String },

    #[error("invalid mask: pixel ({x}, {y}) has value {value}, expected 0 or 255")]
    InvalidMask { x: usize, y: usize, value: u32 },

    #[error("mask is not binary")]
    NonBinaryMask,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("empty mask")]
    EmptyMask,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("tonal file line {line}: {reason}")]
    TonalFormat { line: usize, reason: String },

    #[error("tonal file line {line}: duplicate coordinate ({x}, {y})")]
    DuplicateCoordinate { line: usize, x: usize, y: usize },

    #[error("tonal file line {line}: coordinate ({x}, {y}) outside {width}x{height}")]
    CoordinateOutOfRange {
        line: usize,
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
