//! Boundary-integral (single-layer heat potential) solver for the transient
//! heat equation in a 2-D annular domain whose inner boundary is a perturbed
//! copy of a reference hole.
//!
//! The solver discretizes the coupled boundary system for a mixed problem with
//! a Neumann condition on the fixed outer boundary and a (possibly nonlinear)
//! Robin condition on the moving inner boundary. Time is handled by causal
//! product integration on uniform panels, space by the periodic trapezoidal
//! rule with singularity corrections on the diagonal. Everything is validated
//! against closed-form caloric fields and an independent finite-difference
//! reference solver.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod kernel;
pub mod linear_solver;
pub mod nonlinear_solver;
pub mod ntd;
pub mod oracle;
pub mod potentials;
pub mod suite;

pub use error::{Error, Result};
