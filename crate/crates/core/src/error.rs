use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature not converged: two-level change {change:.3e} exceeds {tolerance:.3e}")]
    QuadratureGuard { change: f64, tolerance: f64 },

    #[error("resolvent near-singular: |lambda - lambda_k| = {distance:.3e} for complement mode")]
    ResolventSingular { distance: f64 },

    #[error("fixed-point iteration for the complement component failed to contract after {iterations} iterations (last change {last_change:.3e})")]
    NonContraction { iterations: usize, last_change: f64 },

    #[error("Newton iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("closed form unavailable: {0}")]
    HypothesisViolated(String),

    #[error("numerical fault: {0}")]
    NumericalFault(String),
}
