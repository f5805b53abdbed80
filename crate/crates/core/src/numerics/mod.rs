//! Shared numerical machinery: periodic grids, spectral transforms, seeded
//! random streams, density sampling and binned distribution statistics.

pub(crate) mod fft;
mod grid;
mod histogram;
mod rng;
mod sampling;
mod stats;

pub use fft::{dft_forward, dft_inverse, SpectralPlan};
pub use grid::{ComplexField, Grid};
pub use histogram::{l1_distance, AxisBinning, Binning, BinnedMass, EmpiricalDistribution};
pub use rng::RngStream;
pub use sampling::{sample_from_density, CellSampler};
pub use stats::{
    classify_typicality, l1_noise_quantile, mean_and_sd, wilson_interval, Classification,
    MeasureEstimate, TypicalityVerdict, DEFAULT_TAU, Z_99,
};
