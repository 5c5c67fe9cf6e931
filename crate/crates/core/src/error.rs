use thiserror::Error;

/// Every failure mode of the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QbdError {
    #[error("quadratic form is not normalizable: {context}")]
    NonNormalizable { context: String },

    #[error("singular quadratic form (|det| = {det:e}){}", at_time.map(|t| format!(" at t = {t}")).unwrap_or_default())]
    SingularForm { det: f64, at_time: Option<f64> },

    #[error("ODE integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("degenerate bath: {0}")]
    DegenerateBath(String),

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("bad fit: residual RMS {rms:.4} exceeds {limit} in {window} window")]
    BadFit { window: String, rms: f64, limit: f64 },

    #[error("unstable grid step at t = {t}: norm grew by {growth:.3}x")]
    UnstableStep { t: f64, growth: f64 },

    #[error("boundary leak at t = {t}: edge mass {mass:e} exceeds {threshold:e}")]
    BoundaryLeak { t: f64, mass: f64, threshold: f64 },

    #[error("imaginary residue {residue:e} in {quantity} exceeds {limit:e}")]
    ImaginaryResidue {
        quantity: &'static str,
        residue: f64,
        limit: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, QbdError>;
