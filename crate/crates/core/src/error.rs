use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pmf `{label}` is not fully supported on its window: entry {index} is zero")]
    NotFullSupport { label: String, index: usize },

    #[error("shape mismatch: expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("integrator missed tolerance {tol:e}: estimated error {estimate:e} ({detail})")]
    Accuracy { tol: f64, estimate: f64, detail: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn window(msg: impl Into<String>) -> Self {
        Error::Window(msg.into())
    }
}
