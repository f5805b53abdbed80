//! Classical Hamiltonian dynamics: systems, velocity Verlet, microcanonical
//! sampling and a Monte Carlo check that the flow preserves phase-space volume.

mod liouville;
mod microcanonical;
mod system;
mod verlet;

pub use liouville::{
    liouville_experiment, liouville_volume_check, LiouvilleOptions, LiouvilleReport,
    LiouvilleSpec, PhaseBox,
};
pub use microcanonical::sample_microcanonical_ideal_gas;
pub use system::{ExternalPotential, HamiltonianSystem, Microstate, PairInteraction};
pub use verlet::{verlet_step, Verlet, DEFAULT_ENERGY_JUMP};
