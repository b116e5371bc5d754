//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("vacuum pressure must be non-negative, got {0}")]
    NegativePressure(f64),

    #[error("operation requires strictly positive vacuum pressure, got {0}")]
    PressureRequired(f64),

    #[error("inertia matrix is not positive definite; inconsistent robot parameters or state")]
    InertiaNotSpd,

    #[error("non-finite state at t = {t} s; reduce the time step")]
    Unstable { t: f64 },

    #[error("invalid input profile: {0}")]
    InvalidProfile(String),

    #[error("audit window invalid: {0}")]
    AuditWindow(String),

    #[error("failed to converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
