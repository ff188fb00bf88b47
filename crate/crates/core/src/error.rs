use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quadrature order {0}")]
    InvalidOrder(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence: {message} (best value {best}, error estimate {error:e})")]
    Convergence {
        message: String,
        best: f64,
        error: f64,
    },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("solver failed after {iterations} iterations, residuals {residuals:?}")]
    SolverFailure {
        iterations: usize,
        residuals: Vec<f64>,
    },
    #[error("degenerate equilibrium: {0}")]
    Degenerate(String),
    #[error("mass plan infeasible: {0}")]
    PlanInfeasible(String),
    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },
    #[error("loss of orthogonality at index {index}: residual {residual:e}")]
    Precision { index: usize, residual: f64 },
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("representation error: {0}")]
    Representation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::SolverFailure { .. }
                | Error::Degenerate(_)
                | Error::PlanInfeasible(_)
                | Error::Precision { .. }
                | Error::Consistency(_)
                | Error::Representation(_)
        )
    }
}
