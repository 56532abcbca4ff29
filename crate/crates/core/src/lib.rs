//! Pseudo-spectral engine for linear surface gravity waves riding on
//! horizontally sheared currents over variable bathymetry.
//!
//! The crate is organized around a surface formulation of the linearized
//! water-wave problem: the free surface and surface potential are evolved with
//! a self-adjoint, symbol-based Dirichlet-to-Neumann operator, and a family of
//! reduced models (ray tracing, wave-action transport, an envelope Schroedinger
//! equation, a mild-slope problem and phase-space distributions) is provided
//! for cross-validation against the direct simulation.
//!
//! * [`grid`] — periodic Fourier grids, transforms, derivatives, interpolation
//! * [`physics`] — dispersion relation kinematics
//! * [`dn`] — Dirichlet-to-Neumann operator: flat, variable-depth, oracles
//! * [`solver`] — time integration of the surface equations
//! * [`diagnostics`] — energy densities and exchange budgets
//! * [`asymptotics`] — rays, action transport, envelope and mild-slope models
//! * [`wigner`] — phase-space energy distributions
//!
//! The `parallel` feature (on by default) runs the hot kernels on rayon;
//! disabling it yields identical sequential results.

pub mod asymptotics;
pub mod diagnostics;
pub mod dn;
pub mod error;
pub mod grid;
pub mod io;
mod par;
pub mod physics;
pub mod solver;
pub mod wigner;

pub use error::{Error, Result};
pub use grid::{ComplexField, Field, SpectralGrid};
