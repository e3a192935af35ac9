use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("configuration outside the potential's domain: {0}")]
    Domain(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("parameter selection failed: {inequality} (R1 = {r1:e})")]
    Selection { inequality: String, r1: f64 },

    #[error("step failure at step {step}: safeguard budget exhausted at q = {q:?}")]
    StepFailure { step: u64, q: Vec<f64>, p: Vec<f64> },

    #[error("control path error: {0}")]
    Path(String),

    #[error("ODE integration failed at s = {time}: {reason}")]
    Ode { time: f64, reason: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("diagnostics error: {0}")]
    Diagnostics(String),
}
