use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Root search for a pooled block value did not meet tolerance.
    /// `lo` and `hi` bracket the root when the bracket was established.
    #[error("root search did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    NonConvergent { lo: f64, hi: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
