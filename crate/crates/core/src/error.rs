use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid gauge: {0}")]
    InvalidGauge(String),

    #[error("invalid interaction parameters: {0}")]
    InvalidInteraction(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("memory budget exceeded: {what} needs {required} bytes, budget is {budget} bytes")]
    MemoryBudget {
        what: String,
        required: u128,
        budget: u128,
    },

    #[error("Krylov exponential did not converge: residual {residual:.3e} after {iterations} iterations ({substeps} substeps)")]
    KrylovNotConverged {
        residual: f64,
        iterations: usize,
        substeps: usize,
    },

    #[error("time step {dt} exceeds configured ceiling {ceiling}")]
    StepTooLarge { dt: f64, ceiling: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::KrylovNotConverged { .. })
    }
}
