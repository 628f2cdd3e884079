use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A cell cover would exceed the configured enumeration cap. Truncating it
    /// would lose candidates, so the operation fails instead.
    #[error(
        "cell enumeration budget of {budget} exceeded (k = {k}, radius/side = {radius_over_side:.4}); \
         use the fast-pre variant or a larger grid side"
    )]
    BudgetExceeded {
        k: usize,
        radius_over_side: f64,
        budget: u64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("index format error: {0}")]
    Format(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
