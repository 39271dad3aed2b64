//! Environmental error of holonomic (non-Abelian geometric) gates in a
//! laser-driven four-level system coupled to a bosonic bath.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] physical parameters, gates and unit conversions,
//! * [`geometry`] closed control loops on the parameter sphere,
//! * [`dynamics`] the driven Hamiltonian, its dark/bright eigensystem and the holonomy,
//! * [`bath`] spectral densities, bath correlation, memory kernel and golden-rule rates,
//! * [`functionals`] closed-form and quadrature error functionals,
//! * [`optimize`] loop optimization, sweeps, critical times and the C_n reduction checks,
//! * [`oracle`] an independent second-order master-equation integrator and the STIRAP comparator.

pub mod bath;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod quad;

pub use error::{Error, Result};
