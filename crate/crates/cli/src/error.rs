use bifurc_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 0 success, 1 i/o, 2 config, 3 solver non-convergence, 4 quadrature guard.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::QuadratureGuard { .. } => 4,
                CoreError::DimensionMismatch { .. }
                | CoreError::OutsideDomain(_)
                | CoreError::InvalidDomain(_)
                | CoreError::InvalidArgument(_)
                | CoreError::HypothesisViolated(_) => 2,
                CoreError::ResolventSingular { .. }
                | CoreError::NonContraction { .. }
                | CoreError::NonConvergence { .. }
                | CoreError::NumericalFault(_) => 3,
            },
        }
    }
}
