//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("diagonal entry {index} must be strictly positive, got {value}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("invalid sampling distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error(
        "quadratic loss has an unbounded gradient on R^d, so no component-Lipschitz \
         constant exists; use logistic loss for private runs"
    )]
    UnboundedLipschitz,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("privacy budget out of range: {0}")]
    BudgetOutOfRange(String),

    #[error("no constant registered for subset {0}")]
    MissingSubsetKey(String),

    #[error("RDP points must share one order, found {0} and {1}")]
    MixedOrders(f64, f64),

    #[error("missing constant `{0}` for the requested bound row")]
    MissingConstant(&'static str),

    #[error("iterate became non-finite at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
