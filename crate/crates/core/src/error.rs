use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside an operation's domain (bad cardinalities, empty sets, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// `p(i) > 0` while `q(i) == 0` under strict support checking.
    #[error("support violation at flat index {index}: p = {p}, q = 0")]
    Support { index: usize, p: f64 },

    /// A conditional row with zero parent mass was consumed.
    #[error("conditional row for state {state:?} is undefined (zero parent mass)")]
    UndefinedRow { state: Vec<usize> },

    #[error("observed state {state:?} has zero model probability")]
    ZeroLikelihood { state: Vec<usize> },

    #[error("operation not supported for model kind {0}")]
    UnsupportedKind(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
