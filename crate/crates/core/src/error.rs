use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("orbit too short: need {needed} values, have {available}")]
    Length { needed: usize, available: usize },

    #[error("cell {0} of the partition received zero invariant mass")]
    EmptyCell(usize),

    #[error("conditional-expectation bin {0} is empty")]
    EmptyBin(usize),

    #[error("under-resolved grid: |P m|_1 = {0:.3e} exceeds 0.1")]
    UnderResolved(f64),

    #[error("matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),

    #[error("trajectory left the admissible region (|x| = {0:.3e})")]
    Blowup(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
