//! A desk-scale laboratory for the Vlasov–Poisson and Vlasov–Yukawa systems.
//!
//! * [`vfield`] — exact algebra of the commuting vector fields.
//! * [`grid`] — phase-space densities, spatial fields, particles.
//! * [`greens`] — Green's-function field solvers and Bessel kernels.
//! * [`transport`] — semi-Lagrangian and particle time stepping.
//! * [`diagnostics`] — energies, Klainerman–Sobolev ratios, decay fits, bilinear terms.
//! * [`modified`] — modified vector fields and bootstrap checks.
//! * [`runner`] — configuration, orchestration and run records.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod greens;
pub mod grid;
pub mod interp;
pub mod modified;
pub mod par;
pub mod quadrature;
pub mod runner;
pub mod transport;
pub mod vfield;

pub use error::{LabError, Result};
