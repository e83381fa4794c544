use thiserror::Error;

/// Errors raised by tree, pairing, graph, solver and scenario operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the arguments was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is larger than an exhaustive routine accepts.
    #[error("capacity exceeded: {size} vertices > limit {limit}; {hint}")]
    Capacity {
        size: usize,
        limit: usize,
        hint: &'static str,
    },

    /// The iterative eigensolver ran out of budget.
    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:e})")]
    Solver {
        iterations: usize,
        best_residual: f64,
    },

    /// A churn scenario could not continue.
    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
