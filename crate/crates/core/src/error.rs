//! Error types shared across the simulation core.

use alloc::string::String;

/// Unified error type for the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A physical parameter or configuration value is out of range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Operator dimensions do not match the Hilbert space.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The adaptive integrator could not reach the requested tolerance.
    #[error("integration failure at t = {t_ps} ps: {reason}")]
    IntegrationFailure { t_ps: f64, reason: String },

    /// A Monte Carlo trajectory lost its state norm (numerical underflow).
    #[error("trajectory failure at t = {t_ps} ps: {reason}")]
    TrajectoryFailure { t_ps: f64, reason: String },

    /// A quantity that must stay real picked up a significant imaginary part.
    #[error("expectation of {label} has imaginary part {imag:e} beyond tolerance")]
    NotReal { label: &'static str, imag: f64 },

    /// A fit could not be set up (insufficient or degenerate data).
    #[error("fit setup failed: {0}")]
    FitSetup(String),

    /// Input data violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Shorthand used by parameter validation.
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
