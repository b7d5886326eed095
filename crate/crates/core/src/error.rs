use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("item `{item}` is ineligible: no haircut for ({icad}, {bucket}, {regime})")]
    Ineligible {
        item: String,
        icad: String,
        bucket: String,
        regime: String,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("infeasible_base: no feasible cover exists even without the coverage cap (most violated: {constraint}, slack {slack})")]
    InfeasibleBase { constraint: String, slack: f64 },

    #[error("empty_model: {0}")]
    EmptyModel(String),

    #[error("statevector width {width} exceeds the simulator limit of {limit} qubits")]
    WidthTooLarge { width: usize, limit: usize },

    #[error("search space of {size:e} lot vectors exceeds the enumeration limit of {limit:e}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    #[error("allocation invalid: {0}")]
    InvalidAllocation(String),

    #[error("no feasible allocation found; minimal buffer diagnostics: {0}")]
    NoFeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
