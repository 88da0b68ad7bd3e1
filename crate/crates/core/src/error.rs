use thiserror::Error;

pub type Result<T, E = NefError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NefError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e}, best iterate {best:?})")]
    Convergence {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("iterate left the domain and backtracking was exhausted at {point:?}")]
    DomainEscape { point: Vec<f64> },

    /// `at` is the parameter (θ, or m for the ODE) where the singularity sits.
    #[error("singularity at {at:?}: {detail}")]
    Singularity { at: Vec<f64>, detail: String },

    #[error("density is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("domain is empty on its sampling window: {0}")]
    EmptyDomain(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl NefError {
    /// Input and validation problems, as opposed to numerical breakdowns.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            NefError::InvalidArgument(_)
                | NefError::NotFound(_)
                | NefError::Parse { .. }
                | NefError::Validation(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NefError::InvalidArgument(msg.into())
    }
}
