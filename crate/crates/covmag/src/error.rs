use thiserror::Error;

/// Errors raised by library operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("miscalibrated gate: J_zz * t_e = {product} (expected pi)")]
    MiscalibratedGate { product: f64 },
    #[error("degenerate readout contrast: alpha0 == alpha1")]
    DegenerateContrast,
    #[error("invalid readout model: {0}")]
    InvalidReadout(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("no resonance found: {0}")]
    NoResonance(String),
    #[error("not resonant: depth {depth} below threshold {threshold}")]
    NotResonant { depth: f64, threshold: f64 },
    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),
    #[error("degenerate coherence: C1*C2 = 0")]
    DegenerateCoherence,
    #[error("poor fit: {0}")]
    PoorFit(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
