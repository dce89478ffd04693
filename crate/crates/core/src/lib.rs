//! Deformed semicircle law, CLT parameters for linear spectral statistics of
//! deformed Wigner matrices `W = A/√N + ϑV`, and a Monte Carlo harness that
//! checks them.

// Rule constants are kept at full published precision; negated float
// comparisons are used so that NaN takes the error branch.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clt;
pub mod error;
pub mod experiments;
pub mod freeconv;
pub mod measures;
pub mod quadrature;
pub mod rmt_sim;

pub use clt::{CltParameters, Contour, ContourOptions, TestFunction};
pub use error::{Error, Result};
pub use freeconv::{FreeConvolution, SolverOptions, StieltjesSolution, SupportInterval};
pub use measures::{Deformation, DiagonalMode, DiagonalSpec, SpectralMeasure};
