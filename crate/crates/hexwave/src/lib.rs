//! Numerics for Dirac points of the 2D TE Maxwell operator in honeycomb
//! media and for the Dirac envelope equation that governs slowly modulated
//! wave packets near them.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: triangular lattice, dual lattice, the 120° rotation and
//!   plane-wave index sets.
//! - [`material`]: material weights, perturbations, certificates and cell
//!   Fourier tables.
//! - [`bloch`]: plane-wave Bloch eigenproblem and symmetry operators.
//! - [`dirac`]: Dirac point data, conical constant, mass coefficient,
//!   nonlinear coefficients and the low-contrast check.
//! - [`envelope`]: pseudo-spectral RK4 solver for the envelope system.
//! - [`modes`]: Newton-CG stationary modes.
//! - [`maxwell_te`]: desk-scale linear TE time evolution.
//! - [`io`], [`config`], [`render`]: file formats and run configuration.

pub mod bloch;
pub mod config;
pub mod dirac;
pub mod envelope;
pub mod error;
pub mod io;
pub mod lattice;
pub mod material;
pub mod maxwell_te;
pub mod modes;
pub mod render;
pub mod spectral;

pub use error::{Category, Error, Result};
pub use lattice::{FourierIndexSet, HexLattice, HighSymmetry, KPoint, Vec2};
pub use material::{FourierTable, HoneycombCertificate, MaterialWeight, PerturbationWeight};
pub use num_complex::Complex64 as C64;
