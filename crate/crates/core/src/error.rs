use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The flop coordinate change is undefined at this point (the relevant
    /// fibre coordinate vanishes).
    #[error("flop coordinate change is indeterminate: {0} = 0")]
    IndeterminateFlop(&'static str),

    #[error("point lies on (or numerically at) the zero section")]
    OnZeroSection,

    #[error("point lies on the fibre at infinity (xi1 = 0)")]
    InfiniteFibre,

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("sample list is empty")]
    EmptySamples,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("forms are evaluated at different base points")]
    BaseMismatch,

    #[error("reference form is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("finite-difference stencil left the domain of the function")]
    StencilOutOfDomain,

    #[error("metric is singular on the stencil (det <= 0)")]
    SingularMetric,

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("power-law fit needs positive data: {0}")]
    NonPositiveData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
