use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("solver failed to converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    /// The parameter lies outside the model's admissible set, e.g. a
    /// nonpositive wavespeed.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time stepping became unstable at step {step}")]
    Stability { step: usize },

    #[error("point {0:?} lies outside the mesh domain")]
    OutsideDomain(Vec<f64>),
}

impl Error {
    /// Errors that depend only on where the parameter sits. Line searches
    /// treat these as a rejected trial point rather than a hard failure.
    pub fn is_parameter_dependent(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Config(_) | Error::Stability { .. })
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
