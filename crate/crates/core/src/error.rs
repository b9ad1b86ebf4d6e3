use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("point is outside dom F: {0}")]
    Domain(String),

    #[error("inner solver stopped after {iterations} iterations with residual {residual:e}")]
    Convergence {
        iterations: usize,
        residual: f64,
        /// Best iterate found before giving up.
        best: Vec<f64>,
    },

    #[error("undefined extended-real arithmetic: {0}")]
    NotANumber(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
