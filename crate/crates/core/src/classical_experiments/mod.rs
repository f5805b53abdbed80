//! Ideal-gas, coin-toss and stone-throw experiments on top of the classical
//! dynamics.
//!
//! Initial conditions for coins and stones are drawn from the uniform measure
//! over the configured parameter ranges. That measure is a conditional
//! surrogate, and every coin and stone report says so in its notes.

mod coin;
mod maxwell;
mod stone;

pub use coin::{coin_lln_experiment, coin_outcome, CoinFace, CoinLlnSpec, CoinMachineSpec};
pub use maxwell::{
    empirical_velocity_fraction, maxwell_density, maxwell_lln_experiment,
    maxwell_target_fraction, MaxwellLlnSpec, ThermalSpec, VelocityWindow,
};
pub use stone::{stone_sup_deviations, stone_throw_robustness, Jitter, StoneThrowSpec, ThirdBody};

pub(crate) const SURROGATE_NOTE: &str = "typicality measure: uniform (Lebesgue) over the configured \
parameter ranges, a conditional surrogate for the measure on the full phase space";

/// Deviation-set estimates along a size ladder decrease: each step is a
/// strict decrease, except that an estimate already at zero may stay at zero
/// (zero hits is the resolution floor of a finite seed count).
pub(crate) fn ladder_decreases(estimates: &[f64]) -> bool {
    estimates
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

/// `|frequency − target| > ε`. Exact ties count as within the window.
pub(crate) fn deviates(frequency: f64, target: f64, epsilon: f64) -> bool {
    (frequency - target).abs() > epsilon * (1.0 + 1e-12)
}
