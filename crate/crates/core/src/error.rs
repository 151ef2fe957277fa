use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("s must lie in (d-1, d); got d = {d}, s = {s}")]
    InvalidParams { d: usize, s: f64 },
    #[error("singular evaluation: {0}")]
    Singular(&'static str),
    #[error("numerical accuracy not reached: target {target:e}, achieved {achieved:e}")]
    Accuracy { target: f64, achieved: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("charge balance violated: {points} points in a box of volume {volume}")]
    ChargeBalance { points: usize, volume: usize },
    #[error("swap windows overlap on the torus")]
    WindowOverlap,
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
