use thiserror::Error;

/// Errors raised by the solvers, diagnostics and transforms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid problem setup: {0}")]
    Setup(String),

    #[error("initial data rejected: {0}")]
    InitialData(String),

    #[error("singular tridiagonal system: pivot {pivot:e} at row {index}")]
    SingularPivot { index: usize, pivot: f64 },

    #[error("tridiagonal system has inconsistent lengths: {0}")]
    Shape(String),

    #[error("v lost positivity at node {index} (t = {t}, v = {value:e})")]
    PositivityLoss { index: usize, t: f64, value: f64 },

    #[error("non-finite value in solution at t = {t}")]
    Divergence { t: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t} before reaching t_final = {t_final}")]
    MaxSteps {
        max_steps: usize,
        t: f64,
        t_final: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("ladder rung epsilon = {epsilon} failed: {source}")]
    Ladder {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}
