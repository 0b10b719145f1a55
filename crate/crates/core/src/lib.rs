//! Semi-discrete wave equations on diffeomorphically mapped grids, together
//! with the Hamiltonian ray systems that describe how their high-frequency
//! solutions travel.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: uniform reference grids on `[-1, 1]` and their images under a
//!   smooth mesh map.
//! - [`coefficients`]: density/stiffness profiles and the derived speeds used
//!   by schemes and rays alike.
//! - [`solver1d`]: the three-point scheme, leapfrog time stepping, discrete
//!   energy and the d'Alembert reference solution.
//! - [`rays`]: dispersion laws, ray ODEs with boundary reflection, equilibria
//!   and phase portraits.
//! - [`wave2d`]: the five-point scheme on tensor grids, the separated-variable
//!   spectral solver, decoupled 2D rays and trapped-orbit periods.
//!
//! Numerical helpers live in [`ode`], [`quadrature`], [`eigen`] and
//! [`output`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod eigen;
pub mod error;
pub mod mesh;
pub mod ode;
pub mod output;
pub mod quadrature;
pub mod rays;
pub mod solver1d;
pub mod wave2d;

pub use error::{Error, Result};

/// Complex scalar used for all wave fields.
pub type C64 = num_complex::Complex64;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
