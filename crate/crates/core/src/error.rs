//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the laboratory.
///
/// Recoverable "soft" outcomes (an expression outside a span, a boundary
/// contamination flag, a residual warning) are values, not errors.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid dimension {n}: {reason}")]
    InvalidDimension { n: usize, reason: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("CFL violation: dt = {dt:.4e} exceeds the stable limit; suggested dt = {suggested:.4e}")]
    CflViolation { dt: f64, suggested: f64 },

    #[error("stencil budget exceeded: {0}")]
    StencilBudget(String),

    #[error("grid of {cells} cells exceeds the memory budget of {budget} cells")]
    MemoryBudget { cells: u128, budget: u128 },

    #[error("time tags out of sync: expected t = {expected}, found t = {found}")]
    Desynchronized { expected: f64, found: f64 },

    #[error("{0}")]
    Unsupported(String),

    /// `line` is 1-based; 0 marks a semantic error not tied to one line.
    #[error("config{}: {message}", line_suffix(*.line))]
    Config { line: usize, message: String },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

fn line_suffix(line: usize) -> String {
    if line > 0 {
        format!(" line {line}")
    } else {
        String::new()
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidArgument(msg.into())
}
