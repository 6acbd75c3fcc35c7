//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero vector: L2 norm is 0")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("row {row} is not L2-normalized (norm {norm})")]
    NotNormalized { row: usize, norm: f64 },

    #[error("duplicate descriptor id {id:?}")]
    DuplicateId { id: String },

    #[error("covariance rank {rank} is below the requested output dimension {requested}")]
    RankDeficient { rank: usize, requested: usize },

    #[error("entropy singularity: views {i} and {j} coincide (distance {distance:.3e})")]
    EntropySingularity { i: usize, j: usize, distance: f64 },

    #[error("background set has {count} descriptors, need at least {needed}")]
    BackgroundTooSmall { count: usize, needed: usize },

    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid batch structure: {0}")]
    InvalidBatch(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("{path}: malformed file at byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code contract: 0 success, 1 usage error, 2 data error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
