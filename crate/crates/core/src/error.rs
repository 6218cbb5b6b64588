use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (must be 1..=255)")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} samples, got {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("no training samples passed the selection filter")]
    NoTrainingSamples,
    #[error("need at least 2 training samples, got {0}")]
    InsufficientSamples(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invalid S/P pair at ({row}, {col}), channel {channel}: both parts positive")]
    InvalidPair {
        row: usize,
        col: usize,
        channel: usize,
    },

    #[error("degenerate input: spectral energy is essentially zero")]
    DegenerateInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate variance")]
    DegenerateVariance,
    #[error("not enough points: need {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("{path}:{line}: malformed manifest row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("no lambda for codec `{0}`; pass --lambda")]
    MissingLambda(String),
    #[error("every record in the batch failed")]
    NoValidRecords,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
