use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("d and k must both be at least 1 (got d={d}, k={k})")]
    InvalidDims { d: usize, k: usize },

    #[error("total dimension d^k = {total} exceeds the configured cap of {cap}")]
    DimCapExceeded { total: u64, cap: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for total dimension {total}")]
    IndexOutOfRange { index: usize, total: usize },

    #[error("subsystem {subsystem} outside 1..={k}")]
    SubsystemOutOfRange { subsystem: usize, k: usize },

    #[error("compute budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("scalar field mismatch: {0}")]
    FieldMismatch(String),

    #[error("quadratic form |{value:.3e}| below threshold {threshold:.3e}; the draw was (almost surely impossibly) orthogonal, redraw with another stream")]
    DegenerateQuadraticForm { value: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix file: {0}")]
    MatrixFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
