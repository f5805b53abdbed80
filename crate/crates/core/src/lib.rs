//! Desk-scale numerical laboratory for typicality arguments in deterministic
//! mechanics.
//!
//! The crate is layered bottom-up:
//!
//! - [`numerics`]: grids, spectral transforms, seeded sampling, binned
//!   distributions and typicality verdicts.
//! - [`classical`]: Hamiltonian systems, velocity Verlet, microcanonical
//!   sampling and the Liouville volume check.
//! - [`classical_experiments`]: the ideal gas, coin toss and stone throw
//!   experiments.
//! - [`bohm`]: split-step Schrödinger propagation, guiding-equation
//!   trajectories and the equivariance check.
//! - [`subsystems`]: conditional and effective wave functions, conditional
//!   Born statistics, the Born-rule law of large numbers and the absolute
//!   uncertainty experiment.
//!
//! Every experiment is a pure function of its spec and a 64-bit seed. Work is
//! split into fixed units with their own random streams, so results do not
//! depend on how many threads rayon uses.

pub mod bohm;
pub mod classical;
pub mod classical_experiments;
mod error;
pub mod numerics;
pub mod report;
pub mod subsystems;

pub use error::{Error, Result};

/// Version string recorded in every report.
pub fn version() -> &'static str {
    concat!("typicality-core ", env!("CARGO_PKG_VERSION"))
}
