use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input shapes, unknown ids, inadmissible parameters.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid money value {input:?}: {message}")]
    Money { input: String, message: String },

    #[error("capacity exceeded in {what}: {required} > cap {cap}; {advice}")]
    Capacity {
        what: &'static str,
        required: u128,
        cap: u128,
        advice: &'static str,
    },

    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("insufficient statistical power: {have} replications, need at least {need}")]
    StatisticalPower { have: usize, need: usize },

    #[error("infeasible alternative at slot {slot}: violates {constraint}")]
    InfeasibleAlternative { slot: u64, constraint: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }
}
