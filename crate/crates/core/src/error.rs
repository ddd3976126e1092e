use thiserror::Error;

/// Errors produced by the cost models and numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A link of this length delivers no secret key, so its per-bit cost is unbounded.
    #[error("infeasible link distance {ell} km: secret key rate is zero")]
    InfeasibleDistance { ell: f64 },

    /// An iterative method did not reach its tolerance.
    #[error("numerical failure in {context} (best estimate {best_estimate})")]
    NumericalFailure {
        context: String,
        best_estimate: f64,
    },

    /// The operation needs a closed form that this rate model does not have.
    #[error("unsupported rate model: {0}")]
    UnsupportedModel(String),

    /// An exact integer result does not fit the return type.
    #[error("range error: {0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numerical(context: impl Into<String>, best_estimate: f64) -> Error {
    Error::NumericalFailure {
        context: context.into(),
        best_estimate,
    }
}
