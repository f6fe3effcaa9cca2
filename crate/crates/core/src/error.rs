use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero signal: {0}")]
    ZeroSignal(&'static str),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is singular or rank deficient: {0}")]
    Singular(String),
    #[error("invalid conic program: {0}")]
    InvalidProgram(String),
    #[error("inner solver failed at outer iteration {iteration}: {status}")]
    SolverFailure { iteration: usize, status: String },
    #[error("numerical failure at iteration {iteration}: {reason}")]
    NumericalFailure { iteration: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of an iterative solver (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SolverFailure { .. } | Error::NumericalFailure { .. })
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, found })
    }
}
