use thiserror::Error;

use crate::oracle::OracleError;
use crate::problems::ParseError;
use crate::separation::SeparationError;
use crate::solvers::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entry {value} at position {position} is not binary")]
    NotBinary { position: usize, value: u8 },

    #[error("conflicting labels: {0}")]
    ConflictingLabel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error(transparent)]
    Separation(#[from] SeparationError),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
