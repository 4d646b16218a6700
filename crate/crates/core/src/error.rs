//! Error types shared across the crate.
//!
//! Errors are split into four categories that map onto the CLI exit codes:
//! configuration (2), data (3), numeric degeneracy (4), and I/O (treated as
//! data at the process boundary).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Invalid parameters or configuration (bad flags, out-of-range values,
    /// missing input paths at configuration time).
    #[error("config error: {0}")]
    Config(String),

    /// Input data violates the contract (too many malformed records, schema
    /// mismatch between stages, empty corpus where one is required).
    #[error("data error: {0}")]
    Data(String),

    /// A numeric procedure cannot proceed (degenerate regression input,
    /// undefined statistic).
    #[error("numeric degeneracy: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    /// Process exit code for this error per the CLI contract:
    /// 2 = config error, 3 = data error, 4 = numeric degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Config(_) => 2,
            CoreError::Data(_) | CoreError::Io(_) | CoreError::Csv(_) | CoreError::Json(_) => 3,
            CoreError::Degenerate(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
