use thiserror::Error;

use crate::linsolve::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fractional order {0} is outside the open interval (0, 1)")]
    InvalidOrder(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("history of {len} levels exceeds weight capacity {capacity}")]
    HistoryTooLong { len: usize, capacity: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh with {0} cells per side has no interior nodes (need at least 2)")]
    MeshTooSmall(usize),

    #[error("fine mesh {fine} cells per side is not a multiple (>= 2x) of coarse mesh {coarse}")]
    NotNested { coarse: usize, fine: usize },

    #[error("function lives on a mesh with {found} cells per side, expected {expected}")]
    MeshMismatch { expected: usize, found: usize },

    #[error("point ({x}, {y}) lies outside the unit square")]
    OutsideDomain { x: f64, y: f64 },

    #[error("quadrature did not reach tolerance {tolerance:e}: error estimate {estimate:e} after {evaluations} evaluations")]
    Quadrature {
        tolerance: f64,
        estimate: f64,
        evaluations: usize,
    },

    #[error("linear solver did not converge: {report:?}")]
    LinearNotConverged { report: SolveReport },

    #[error("matrix is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    NotPositiveDefinite { curvature: f64, iteration: usize },

    #[error("zero pivot at row {row} in direct factorisation")]
    SingularPivot { row: usize },

    #[error(
        "newton iteration {reason} after {iterations} iterations; update norms {trajectory:?}"
    )]
    NewtonFailed {
        reason: &'static str,
        iterations: usize,
        trajectory: Vec<f64>,
    },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            other => Error::Step {
                step,
                source: Box::new(other),
            },
        }
    }
}
