use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical routines, the simulation harness and the
/// persistence layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("{op}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("fixed point left the upper half plane at z = {z}")]
    NonHerglotz { z: Complex64 },

    #[error("support edge not bracketed on the {side} side: {reason}")]
    EdgeNotBracketed { side: &'static str, reason: String },

    #[error("|I(z1, z2)| = {0:.6} >= 1: contour too close to the support")]
    KernelOutOfRange(f64),

    #[error(
        "regularity assumption violated: inf over the support hull of \
         the inverse-square moment is {min_value:.6} < 1 + varpi = {threshold:.6} (at x = {argmin:.6})"
    )]
    RegularityViolation {
        min_value: f64,
        threshold: f64,
        argmin: f64,
    },

    #[error("eigensolver failed: {0}")]
    ConvergenceFailure(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema mismatch: found version {found}, expected {expected}")]
    SchemaMismatch { found: String, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NonHerglotz { .. }
                | Error::EdgeNotBracketed { .. }
                | Error::KernelOutOfRange(_)
                | Error::ConvergenceFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
