use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("NonPositiveSigma: volatility must be finite and > 0, got {0}")]
    NonPositiveSigma(f64),

    #[error("EmptySupport: the drift distribution needs at least one support point")]
    EmptySupport,

    #[error("UnorderedDrifts: drift values must be finite and strictly increasing ({0})")]
    UnorderedDrifts(String),

    #[error("InvalidPrior: {0}")]
    InvalidPrior(String),

    #[error("InvalidAlpha: power coefficient must satisfy alpha < 1 and alpha != 0 here, got {0}")]
    InvalidAlpha(f64),

    #[error("InvalidQuery: {0}")]
    InvalidQuery(String),

    #[error("DegenerateHorizon: t = T = {0}; use the maturity closed form")]
    DegenerateHorizon(f64),

    #[error("QuadratureNotConverged: last two estimates {previous} and {current} with {nodes} nodes")]
    QuadratureNotConverged {
        previous: f64,
        current: f64,
        nodes: usize,
    },

    #[error("HypothesisViolated: {0}")]
    HypothesisViolated(String),

    #[error("InvalidLambda: lambda = {lambda} outside the admissible interval ({lower}, {upper})")]
    InvalidLambda { lambda: f64, lower: f64, upper: f64 },

    #[error("StepTooLarge: posterior left [-0.1, 1.1] at t = {time} (value {value}); reduce the step")]
    StepTooLarge { time: f64, value: f64 },

    #[error("InvalidSimulation: {0}")]
    InvalidSimulation(String),
}

impl Error {
    /// The bare variant name, used for machine-readable CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveSigma(_) => "NonPositiveSigma",
            Error::EmptySupport => "EmptySupport",
            Error::UnorderedDrifts(_) => "UnorderedDrifts",
            Error::InvalidPrior(_) => "InvalidPrior",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::InvalidQuery(_) => "InvalidQuery",
            Error::DegenerateHorizon(_) => "DegenerateHorizon",
            Error::QuadratureNotConverged { .. } => "QuadratureNotConverged",
            Error::HypothesisViolated(_) => "HypothesisViolated",
            Error::InvalidLambda { .. } => "InvalidLambda",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::InvalidSimulation(_) => "InvalidSimulation",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
