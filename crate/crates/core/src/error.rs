//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by fitting, inference, resampling and quadrature routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("regressor matrix is collinear (singular value ratio below rank tolerance)")]
    CollinearRegressors,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("score jacobian is singular and could not be regularized")]
    SingularJacobian,

    #[error("bread matrix is singular")]
    SingularBread,

    #[error("solver did not converge in {max_iter} iterations (mean score norm {residual:e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    #[error("perfect separation: parameter norm exceeded {0:e} during fitting")]
    PerfectSeparation(f64),

    #[error("score evaluated to a non-finite value")]
    NonFiniteScore,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("population oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("regressor `{0}` has zero spread")]
    DegenerateRegressor(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("all {0} bootstrap resamples failed")]
    AllResamplesFailed(usize),

    #[error("{failed} of {total} bootstrap resamples failed (above the 10% limit)")]
    ExcessiveResampleFailures { failed: usize, total: usize },

    #[error("unknown population `{0}`")]
    UnknownPopulation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code for CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::CollinearRegressors => "collinear_regressors",
            Error::SingularSystem => "singular_system",
            Error::SingularJacobian => "singular_jacobian",
            Error::SingularBread => "singular_bread",
            Error::NoConvergence { .. } => "no_convergence",
            Error::PerfectSeparation(_) => "perfect_separation",
            Error::NonFiniteScore => "non_finite_score",
            Error::Domain(_) => "domain_error",
            Error::QuadratureFailure(_) => "quadrature_failure",
            Error::OracleUnavailable(_) => "oracle_unavailable",
            Error::DegenerateRegressor(_) => "degenerate_regressor",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::AllResamplesFailed(_) => "all_resamples_failed",
            Error::ExcessiveResampleFailures { .. } => "excessive_resample_failures",
            Error::UnknownPopulation(_) => "unknown_population",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io(_) => "io_error",
            Error::Csv(_) => "csv_error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
