use std::io;

use thiserror::Error;

/// Errors produced anywhere in the scaling / factorization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index ({row}, {col}) out of range for order {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("scaling factor {index} is not strictly positive and finite: {value}")]
    InvalidScaling { index: usize, value: f64 },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("matrix market line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported {0}")]
    Unsupported(String),

    #[error("matrix is not square ({rows} x {cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("inconsistent mirrored entries at ({row}, {col})")]
    InconsistentMirror { row: usize, col: usize },

    #[error("matrix has no nonzero entries")]
    AllZero,

    #[error("row {0} is structurally zero")]
    ZeroRow(usize),

    #[error("matrix is structurally singular (no perfect matching)")]
    StructurallySingular,

    #[error("non-finite value produced during factorization at pivot step {0}")]
    NonFiniteFactor(usize),

    #[error("system is singular and the right-hand side is not in its range")]
    NoSolution,

    #[error("inertia correction failed after {0} factorizations")]
    InertiaCorrectionFailed(usize),

    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),

    #[error("time limit exceeded")]
    TimeLimit,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
