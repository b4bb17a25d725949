use thiserror::Error;

/// Errors produced by the estimation and testing pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid is not strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },

    #[error("grid point {value} lies outside [0, 1]")]
    GridOutOfUnitInterval { value: f64 },

    #[error("non-finite value in {what} at index {index}")]
    NonFiniteValue { what: &'static str, index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid needs at least {needed} points, got {got}")]
    GridTooShort { needed: usize, got: usize },

    #[error("symmetric eigensolver did not converge")]
    EigenFailure,

    #[error("covariance spectrum is identically zero")]
    AllZeroSpectrum,

    #[error("component {component} has a clipped (zero) eigenvalue")]
    ZeroEigenvalue { component: usize },

    #[error("time {t} is outside the slope grid [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("local fit at v = {v} is degenerate ({effective} effectively weighted distinct points)")]
    Degenerate { v: f64, effective: usize },

    #[error("no evaluation point admits a local fit")]
    AllDegenerate,

    #[error("empty list of statistics")]
    EmptyList,

    #[error("value {v} outside the domain of example {example}")]
    DomainError { example: u8, v: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures of the numerical procedures themselves, as opposed to
    /// malformed input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenFailure
                | Error::AllZeroSpectrum
                | Error::ZeroEigenvalue { .. }
                | Error::Degenerate { .. }
                | Error::AllDegenerate
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
