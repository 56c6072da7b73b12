//! Bifurcation branches of `λu + Δu = η|u|^σ u` with Dirichlet conditions.
//!
//! The crate covers the whole pipeline: exact sine eigenpairs on boxes, the
//! nonlinear coupling integrals, the reduced polynomial system on an eigenspace
//! and its multistart solution, branch construction on a Galerkin truncation,
//! Floquet stability under the complex Ginzburg-Landau flow, the disk example,
//! and nodal-line extraction.

pub mod alpha;
pub mod bessel;
pub mod coupling;
pub mod disk;
pub mod error;
pub mod galerkin;
pub mod nodal;
pub mod quadrature;
pub mod reduction;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
