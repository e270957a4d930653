//! Error taxonomy shared by all modules.
//!
//! The variants map onto the CLI exit codes: usage errors exit with 2,
//! size/domain/rank/partition/channel errors with 3, and verification
//! mismatches with 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatch or a dense materialization beyond the configured cap.
    #[error("size error: {0}")]
    Size(String),

    /// Invalid parameter values (negative temperature, empty spectrum, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Pointer dimension not divisible by the number of outcomes.
    #[error("rank error: {0}")]
    Rank(String),

    /// Invalid channel data (non-unitary matrix, incomplete Kraus set).
    #[error("channel error: {0}")]
    Channel(String),

    /// Invalid pointer partition (overlapping or incomplete blocks).
    #[error("partition error: {0}")]
    Partition(String),

    /// Invalid invocation (bad CLI arguments, mismatched build parameters).
    #[error("usage error: {0}")]
    Usage(String),

    /// A cross-check that must hold numerically did not.
    #[error("verification mismatch: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Verification(_) => 4,
            _ => 3,
        }
    }
}
