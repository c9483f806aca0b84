use thiserror::Error;

use crate::upwind::CflStatus;

pub type Result<T> = std::result::Result<T, HjbError>;

#[derive(Debug, Error)]
pub enum HjbError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error(
        "CFL condition violated: alpha * sup|f| = {} (strict bound requires < 1)",
        .0.alpha_times_sup
    )]
    CflRefused(CflStatus),
}

impl HjbError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HjbError::InvalidArgument(msg.into())
    }

    pub(crate) fn out_of_range(msg: impl Into<String>) -> Self {
        HjbError::OutOfRange(msg.into())
    }
}
