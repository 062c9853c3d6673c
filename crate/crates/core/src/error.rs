use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid of {points} points exceeds the memory budget of {budget}")]
    BudgetExceeded { points: u128, budget: u128 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("expected a {expected}-side field")]
    WrongSide { expected: &'static str },

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("symbol is singular at zero frequency and no override was given")]
    SingularSymbol,

    #[error("time step {step} too coarse: phase increment {increment:.3} exceeds pi")]
    Nyquist { step: f64, increment: f64 },

    #[error("time window {s_max} exceeds the dispersion budget {budget}")]
    DispersionBudget { s_max: f64, budget: f64 },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature unresolved: error bound {bound:.3e} exceeds {limit:.3e}")]
    Unresolved { bound: f64, limit: f64 },

    #[error("extrapolation did not converge: {0}")]
    NonConvergent(String),

    #[error("bracket exhausted: upper end {upper} is not feasible")]
    BracketExhausted { upper: f64 },

    #[error("support leaves the grid: {0}")]
    SupportExceeded(String),

    #[error("scheme failure: {0}")]
    Scheme(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
