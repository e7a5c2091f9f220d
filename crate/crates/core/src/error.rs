use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Validation { line: Option<u64>, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("price {price} is at or below the no-arbitrage lower bound {bound}")]
    BelowIntrinsic { price: f64, bound: f64 },

    #[error("price {price} is at or above the spot {spot}")]
    AboveUpperBound { price: f64, spot: f64 },

    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("basis index {index} out of range for {knots} knots")]
    IndexOutOfRange { index: usize, knots: usize },

    #[error("normal equations are ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("knot layout mismatch: {0}")]
    KnotMismatch(String),

    #[error("insufficient history: need {needed}, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("position expiring {expiry} is too near to {as_of}")]
    ExpiryTooNear { expiry: NaiveDate, as_of: NaiveDate },

    #[error("weight count {weights} does not match scenario count {scenarios}")]
    WeightMismatch { weights: usize, scenarios: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("misaligned series: {0}")]
    Misaligned(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            line: None,
            message: message.into(),
        }
    }
}
