use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    /// A model hypothesis (e.g. `a_j <= 2πL`) does not hold for the input.
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("invalid index {index:?}: {reason}")]
    InvalidIndex { index: Vec<i64>, reason: String },

    #[error("indeterminate ratio: {0}")]
    IndeterminateRatio(String),

    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("numerical failure: {message} (condition estimate {condition:.3e})")]
    NumericalFailure { message: String, condition: f64 },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::UnsupportedInput(_) => "unsupported-input",
            Error::HypothesisViolation(_) => "hypothesis-violation",
            Error::InvalidIndex { .. } => "invalid-index",
            Error::IndeterminateRatio(_) => "indeterminate-ratio",
            Error::InvalidTruncation(_) => "invalid-truncation",
            Error::NumericalFailure { .. } => "numerical-failure",
            Error::InvalidFamily(_) => "invalid-family",
            Error::Io(_) => "io",
        }
    }
}
