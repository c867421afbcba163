use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("dimension mismatch: expected {expected} samples, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown variable '{0}'")]
    UnknownVariable(String),

    #[error("non-finite value in column '{0}'")]
    NonFinite(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("candidate search did not settle after {resets} resets (limit {limit})")]
    Watchdog { resets: usize, limit: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (as opposed to internal failures).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Watchdog { .. } | Error::Invariant(_) | Error::Linalg(_))
    }
}
