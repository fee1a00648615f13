use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The truncation order of a distribution would exceed its hard cap.
    #[error("fourier order {order} exceeds cap {cap}")]
    CapExceeded { order: usize, cap: usize },

    /// The observed outcome has (numerically) zero probability under the prior.
    #[error("degenerate likelihood: normalization {norm:e} is not positive")]
    DegenerateLikelihood { norm: f64 },

    #[error("estimate undefined: first fourier coefficient vanishes")]
    UndefinedEstimate,

    #[error("time {t:e} s outside covered range [{start:e}, {end:e}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("trajectory record has no estimates")]
    EmptyRecord,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
