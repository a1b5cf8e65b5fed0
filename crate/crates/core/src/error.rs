use thiserror::Error;

use crate::model_space::SpaceKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("field lives on a different model space")]
    SpaceMismatch,
    #[error("{op} is not supported on {kind:?} spaces")]
    UnsupportedKind { op: &'static str, kind: SpaceKind },
    #[error("invalid exponent q = {q}: {reason}")]
    InvalidExponent { q: f64, reason: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field must be strictly positive (min = {min})")]
    NonPositiveField { min: f64 },
    #[error("not a probability density: total mass {mass}")]
    NotAProbabilityDensity { mass: f64 },
    #[error("invalid Renyi order alpha = {0}")]
    InvalidAlpha(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("unstable step at t = {t}: entropy rose from {before} to {after}")]
    StepUnstable { t: f64, before: f64, after: f64 },
    #[error("positivity lost at t = {t}: min density {min:e}")]
    PositivityLost { t: f64, min: f64 },
    #[error("convexity condition violated: margin {margin:e}")]
    ConditionViolated { margin: f64 },
    #[error("CD margin {margin:e} below discretization tolerance -{tol:e} at theta = {theta}")]
    CdViolation { margin: f64, tol: f64, theta: f64 },
    #[error("I/O failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
