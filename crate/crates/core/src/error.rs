use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("fields live on different bases")]
    BasisMismatch,

    #[error("mode count {n} out of range 1..={total}")]
    ModeOutOfRange { n: usize, total: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate nonlinearity: {0}")]
    DegenerateNonlinearity(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("stage iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("coefficient magnitude {magnitude:e} exceeds the blow-up sentinel")]
    Overflow { magnitude: f64 },

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("time window [{t0}, {t1}] outside trajectory span [{start}, {end}]")]
    WindowOutOfRange {
        t0: f64,
        t1: f64,
        start: f64,
        end: f64,
    },

    #[error("time {t} is not aligned to the sample spacing {spacing}")]
    Misaligned { t: f64, spacing: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Strips any `AtTime` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
