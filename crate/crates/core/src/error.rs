use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation time lies outside the model's declared domain.
    #[error("t = {t} is outside the model domain ({lo}, {hi})")]
    Domain { t: f64, lo: f64, hi: f64 },

    /// The scale-factor model itself is malformed or produced a non-positive
    /// scale factor.
    #[error("invalid scale-factor model: {0}")]
    Model(String),

    /// A caller violated an operation's preconditions.
    #[error("invalid input: {0}")]
    Usage(String),

    /// Integration or quadrature broke down. `detail` carries the state and
    /// coefficients at the failure point.
    #[error("numerical failure at t = {t}: {reason} ({detail})")]
    Numerical {
        t: f64,
        reason: String,
        detail: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }
}
