use thiserror::Error;

/// Errors produced by the solver toolkit.
#[derive(Debug, Error)]
pub enum SlrError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid matrix structure: {0}")]
    InvalidStructure(String),

    #[error("matrix market line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("factorization breakdown at row {row} (pivot {pivot:e})")]
    Breakdown { row: usize, pivot: f64 },

    #[error("SPD interface required: the interface block is not positive definite (row {row})")]
    SpdInterfaceRequired { row: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("Lanczos failure: {0}")]
    Lanczos(String),

    #[error("insufficient spectrum: no Ritz value at or below {threshold} among {available} values")]
    InsufficientSpectrum { threshold: f64, available: usize },

    #[error("dense size guard exceeded: size {size} > limit {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("indefiniteness detected at iteration {iteration}: {what} = {value:e}")]
    Indefinite {
        iteration: usize,
        what: &'static str,
        value: f64,
    },
}

pub type Result<T> = std::result::Result<T, SlrError>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SlrError::DimensionMismatch { expected, found })
    }
}
