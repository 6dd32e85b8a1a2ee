//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter value or inconsistent argument combination.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Argument outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical guard tripped (blow-up, non-convergence, ceiling).
    #[error("numerical guard: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
