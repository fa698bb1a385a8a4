use thiserror::Error;

/// Errors raised by the bound calculators and verification engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series did not reach its geometric tail within {max_terms} terms (p={p}, beta={beta})")]
    NonConvergent { p: f64, beta: f64, max_terms: usize },

    #[error("derivative does not change sign on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("p={p} is outside the support ({lo}, {hi})")]
    OutOfSupport { p: f64, lo: f64, hi: f64 },

    #[error("combined support is empty")]
    EmptySupport,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kernel is not positive semidefinite (eigenvalue {eigenvalue} vs largest {largest})")]
    NotPsd { eigenvalue: f64, largest: f64 },

    #[error("enumeration needs {outcomes} outcomes, above the limit of {limit}")]
    TooLarge { outcomes: f64, limit: f64 },

    #[error("index {index} on axis {axis} exceeds the {available} available samples")]
    IndexOutOfRange { axis: usize, index: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
