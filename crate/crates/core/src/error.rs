use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of refinements; carries the best estimate.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    Convergence { estimate: f64, error_bound: f64 },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    /// A computed model or result broke an invariant it must satisfy by construction.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("conditioning event is empty: {0}")]
    EmptyConditioning(String),
}

pub type Result<T> = std::result::Result<T, Error>;
