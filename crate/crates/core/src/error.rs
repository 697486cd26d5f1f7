use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("fixed point did not converge within {iterations} iterations (last residual {residual:e})")]
    FixedPointNonConvergence { iterations: usize, residual: f64 },

    #[error("no sign change bracket exists for the root")]
    NoBracket,

    #[error(
        "power multiplier search failed: |P - p_tot| = {gap:e} after {iterations} updates (mu = {mu:e})"
    )]
    MultiplierSearch { gap: f64, iterations: usize, mu: f64 },

    #[error("outside theorem scope: {0}")]
    Scope(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("CCCP iteration {iteration}: {source}")]
    Cccp {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
