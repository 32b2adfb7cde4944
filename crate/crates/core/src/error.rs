use thiserror::Error;

/// Errors raised by the engines and the verification layers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A caller-supplied parameter violates an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// A high-precision density value cannot decide a comparison.
    #[error("precision error: {0}")]
    Precision(String),

    /// Tree enumeration would exceed its budget.
    #[error("tree budget of {budget} exceeded after {count} trees")]
    BudgetExceeded { count: u64, budget: u64 },

    /// A size guard of the geometry oracle was hit.
    #[error("guard exceeded: {0}")]
    Guard(String),

    /// The log-domain engine left the representable exponent range.
    #[error("log-domain overflow: {0}")]
    Overflow(String),

    /// Two routes that must agree did not.
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
