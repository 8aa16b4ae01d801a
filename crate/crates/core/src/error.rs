use thiserror::Error;

/// Errors raised by the estimators, samplers, optimisers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed (factorisation, non-finite objective, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("results file error: {0}")]
    Results(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
