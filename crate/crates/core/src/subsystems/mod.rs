//! From the universal wave function to subsystems: conditional and
//! effective wave functions, conditional Born statistics, the Born-rule law
//! of large numbers and the absolute-uncertainty experiment.

mod born;
mod born_lln;
mod conditional;
mod effective;
mod joint;
mod uncertainty;

pub use born::{conditional_born_statistics, ConditionalBornSpec};
pub use born_lln::{born_lln_experiment, born_tail_probability, BornLlnSpec};
pub use conditional::{conditional_wavefunction, ConditionalWaveFunction, SplitConfiguration, SLICE_THRESHOLD};
pub use effective::{
    detect_effective_wavefunction, effective_detection_experiment, EffectiveDecomposition, EffectiveDetectSpec,
    EffectiveOptions, EffectiveStatus,
};
pub use joint::JointState;
pub use uncertainty::{absolute_uncertainty_experiment, AbsoluteUncertaintySpec};
