use thiserror::Error;

/// Errors produced by the numerical and statistical routines in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A function evaluation produced a non-finite value at a known location.
    #[error("evaluation error at node {node} (a0 = {a0}): {what}")]
    Evaluation { node: usize, a0: f64, what: String },

    /// An iterative solver failed to converge.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input data failed validation.
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
