use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("basis dimension {dim} exceeds limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("invalid mode index {0}")]
    InvalidMode(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coherent state loses {lost:.3e} probability mass to truncation (max {max:.3e})")]
    TruncationLoss { lost: f64, max: f64 },

    #[error("dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },

    #[error("dense solver limit exceeded: dimension {dim} > {limit}; use the trajectory solver")]
    DenseLimit { dim: usize, limit: usize },

    #[error("no interior extremum found: {0}")]
    NoExtremum(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// Process exit code for the CLI: 2 for configuration/input problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::NoExtremum(_) | SimError::Numerical(_) => 3,
            _ => 2,
        }
    }
}
