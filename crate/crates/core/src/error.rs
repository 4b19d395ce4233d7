use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not converge (partial value {partial:e}, error estimate {abs_err:e})")]
    Quadrature { partial: f64, abs_err: f64 },
    #[error("no bracket for inverse of h at target {target:e}")]
    Range { target: f64 },
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("resolution limit: {0}")]
    Resolution(String),
    #[error("series budget exceeded: {0}")]
    Budget(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
