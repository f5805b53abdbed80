//! Bohmian mechanics on periodic 1D and 2D grids: split-step Schrödinger
//! propagation, guiding-equation velocities and trajectories, and the
//! equivariance check.

mod equivariance;
mod history;
mod propagator;
pub mod states;
mod trajectory;
mod velocity;
mod wavefunction;

pub use equivariance::{equivariance_check, EquivarianceSpec, InitialState};
pub use history::PsiHistory;
pub use propagator::{energy_expectation, schrodinger_step, SplitStep, DEFAULT_TAIL_THRESHOLD, TAIL_FRACTION};
pub use trajectory::{
    advance_ensemble, advance_trajectory, integrate_path, FrameVelocities, QualityFlags, Trajectory,
    TrajectoryOptions, VelocityProvider, VelocitySample, V_MAX_CELLS,
};
pub use velocity::{bohmian_velocity, probability_current, VelocityEngine, VelocityField, NODE_THRESHOLD};
pub use wavefunction::{Units, WaveFunction};
