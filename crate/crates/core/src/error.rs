use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("failed to parse scenario: {0}")]
    Parse(String),

    /// Every violated constraint of a scenario document, each prefixed with its field path.
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    InvalidScenario(Vec<String>),

    #[error("infeasible budget: B = {budget} exceeds capacity {capacity}")]
    InfeasibleBudget { budget: f64, capacity: f64 },

    #[error("oracle size guard: {coords} coordinates exceeds limit {limit}")]
    OracleTooLarge { coords: usize, limit: usize },

    #[error("step size {eta} exceeds admissible bound {bound}")]
    StepSize { eta: f64, bound: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
