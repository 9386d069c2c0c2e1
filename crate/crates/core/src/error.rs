use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or an inconsistent configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Grid or excision geometry that cannot be discretized.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    IterationCap { iters: usize, residual: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    /// Field has not been solved to tolerance.
    #[error("field is not solved: residual {0:e}")]
    Unsolved(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for errors caused by the input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Geometry(_) | Error::Unsupported(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
