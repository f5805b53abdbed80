use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bohm::states::gaussian_packet;
use crate::bohm::{Units, WaveFunction};
use crate::error::{config, Result};
use crate::numerics::{ComplexField, Grid};

/// Two-coordinate states `Ψ(x, y)`: `x` is the subsystem, `y` the
/// environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JointState {
    /// `φ(x) χ(y)`, Gaussians with an optional plane-wave factor in `x`.
    Product {
        sigma_x: f64,
        sigma_y: f64,
        #[serde(default)]
        x_centre: f64,
        #[serde(default)]
        momentum_x: f64,
    },
    /// `φ₁(x)χ₁(y) + φ₂(x)χ₂(y)` with Gaussians centred at `(x_i, y_i)`.
    TwoBranch {
        x_centres: [f64; 2],
        y_centres: [f64; 2],
        sigma_x: f64,
        sigma_y: f64,
        #[serde(default)]
        momenta_x: [f64; 2],
    },
    /// `exp(−(x−y)²/4s² − (x+y)²/4S²)`
    CorrelatedGaussian { s: f64, big_s: f64 },
}

impl JointState {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            JointState::Product { sigma_x, sigma_y, .. } | JointState::TwoBranch { sigma_x, sigma_y, .. } => {
                *sigma_x > 0.0 && *sigma_y > 0.0
            }
            JointState::CorrelatedGaussian { s, big_s } => *s > 0.0 && *big_s > 0.0,
        };
        if ok {
            Ok(())
        } else {
            config("state widths must be positive")
        }
    }

    /// Unnormalized amplitude.
    pub fn amplitude(&self, x: f64, y: f64) -> Complex64 {
        match self {
            JointState::Product { sigma_x, sigma_y, x_centre, momentum_x } => {
                gaussian_packet(x, *x_centre, *sigma_x, *momentum_x) * gaussian_packet(y, 0.0, *sigma_y, 0.0)
            }
            JointState::TwoBranch { x_centres, y_centres, sigma_x, sigma_y, momenta_x } => (0..2)
                .map(|i| {
                    gaussian_packet(x, x_centres[i], *sigma_x, momenta_x[i])
                        * gaussian_packet(y, y_centres[i], *sigma_y, 0.0)
                })
                .sum(),
            JointState::CorrelatedGaussian { s, big_s } => {
                let (d, a) = (x - y, x + y);
                Complex64::new((-d * d / (4.0 * s * s) - a * a / (4.0 * big_s * big_s)).exp(), 0.0)
            }
        }
    }

    /// Normalized free wave function on a 2D grid.
    pub fn build(&self, grid: &Grid, units: &Units) -> Result<WaveFunction> {
        self.validate()?;
        if grid.dims() != 2 {
            return config("joint states live on a 2D grid");
        }
        WaveFunction::free(ComplexField::from_fn(*grid, |x, y| self.amplitude(x, y)), units.clone())
    }
}
