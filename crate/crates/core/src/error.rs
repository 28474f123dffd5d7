use thiserror::Error;

/// Errors raised while building or running a scenario.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite {what} at t = {time}")]
    NonFinite { what: &'static str, time: f64 },

    #[error("matrix is not Hurwitz (stability degree {degree})")]
    NotHurwitz { degree: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("attainability fails: largest decay constant alpha0 = {0} is not positive")]
    Unattainable(f64),

    #[error("disturbance norm {norm} exceeds its bound {bound} at t = {time}")]
    DisturbanceBound { norm: f64, bound: f64, time: f64 },

    #[error("relay NF constants infeasible: {0}")]
    NfFitInfeasible(String),

    #[error("singular linear system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
