use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a documented range or shape constraint.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation's precondition does not hold for the given data.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A configuration value is missing or out of range.
    #[error("config error: {0}")]
    Config(String),

    #[error("quadrature did not converge on [{lo}, {hi}] (depth {depth})")]
    Quadrature { lo: f64, hi: f64, depth: u32 },

    /// A resident CSV row failed validation.
    #[error("row {row}, column `{column}`: {message}")]
    Row { row: usize, column: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
