use thiserror::Error;

use crate::solvers::SolverTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or grid sizes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value outside the domain of the function (e.g. `Af + γ <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("momentum schedule error: {0}")]
    Schedule(String),

    #[error("invalid simulation spec: {0}")]
    Spec(String),

    #[error("power iteration did not converge in {iterations} iterations (partial estimate {estimate:e})")]
    PowerIteration { iterations: usize, estimate: f64 },

    /// The solver produced a NaN or infinite value. The partial trace holds
    /// every iteration up to and including the last finite iterate.
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        partial: Box<SolverTrace>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
