//! Numerical laboratory for the Teichmüller horocycle flow on the torus
//! stratum, i.e. the space of unimodular lattices `SL(2,Z)\SL(2,R)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: lattice points, reduction to the modular fundamental
//!   domain, horocycle and geodesic flows, saddle connections, Haar sampling.
//! * [`agy`]: the AGY norm on period coordinates, the differential of the
//!   horocycle flow, local AGY distances and sub-divergence certificates.
//! * [`observables`]: compactly supported Lipschitz bumps, interpolants on a
//!   hierarchical hat basis, zero-mean normalisation.
//! * [`dynamics`]: orbit averages with certified quadrature error,
//!   lacunary time grids and good/exceptional set membership.
//! * [`mixing`]: correlation and orbit-average variance estimators, power-law
//!   rate fits, the variance bound and the Chebyshev step.
//! * [`dimension`]: packings, covers, box-counting, clustering checks and
//!   exceptional-set scans.
//! * [`bounds`]: closed-form dimension bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agy;
pub mod bounds;
pub mod dimension;
pub mod dynamics;
mod error;
pub mod lattice;
pub mod mixing;
pub mod observables;
pub mod stats;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use num_complex::Complex64;
