use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty admissible set: {0}")]
    EmptyAdmissibleSet(String),

    #[error("slice window construction failed at (t={t}, x={x:?}): {reason}")]
    WindowConstruction { t: f64, x: Vec<f64>, reason: String },

    #[error("superdifferential unavailable at (t={t}, x={x:?}): {reason}")]
    Superdifferential { t: f64, x: Vec<f64>, reason: String },
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
