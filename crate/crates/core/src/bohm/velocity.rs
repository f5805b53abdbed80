use super::wavefunction::WaveFunction;
use crate::error::{config, Result};
use crate::numerics::{Grid, SpectralPlan};

/// Points with `|Ψ|² < NODE_THRESHOLD · max |Ψ|²` are masked.
pub const NODE_THRESHOLD: f64 = 1e-10;

/// Guiding velocity on the grid, one component per axis, with a validity
/// mask that is `false` near nodes. Masked points carry zero velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: Grid,
    components: Vec<Vec<f64>>,
    valid: Vec<bool>,
}

impl VelocityField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn masked_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

/// Computes guiding velocities with a reusable transform plan.
#[derive(Debug, Clone)]
pub struct VelocityEngine {
    plan: SpectralPlan,
    threshold: f64,
}

impl VelocityEngine {
    pub fn new(grid: &Grid) -> Result<Self> {
        Self::with_threshold(grid, NODE_THRESHOLD)
    }

    pub fn with_threshold(grid: &Grid, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0 && threshold < 1.0) {
            return config("node threshold must lie in [0, 1)");
        }
        Ok(VelocityEngine { plan: SpectralPlan::new(grid)?, threshold })
    }

    /// `v_k = (ħ/m_k) Im(Ψ̄ ∂_kΨ) / |Ψ|²`, spectral gradient.
    pub fn velocity(&self, wf: &WaveFunction) -> VelocityField {
        let grid = *wf.grid();
        let data = wf.data();
        let rho: Vec<f64> = data.iter().map(|z| z.norm_sqr()).collect();
        let cut = self.threshold * rho.iter().copied().fold(0.0, f64::max);
        let valid: Vec<bool> = rho.iter().map(|&r| r >= cut && r > 0.0).collect();
        let components = (0..grid.dims())
            .map(|axis| {
                let scale = wf.hbar() / wf.mass(axis);
                let d = self.plan.derivative(data, axis);
                data.iter()
                    .zip(&d)
                    .zip(rho.iter().zip(&valid))
                    .map(|((z, dz), (r, ok))| if *ok { scale * (z.conj() * dz).im / r } else { 0.0 })
                    .collect()
            })
            .collect();
        VelocityField { grid, components, valid }
    }

    /// `j_k = (ħ/m_k) Im(Ψ̄ ∂_kΨ)`, defined everywhere.
    pub fn current(&self, wf: &WaveFunction) -> Vec<Vec<f64>> {
        let data = wf.data();
        (0..wf.grid().dims())
            .map(|axis| {
                let scale = wf.hbar() / wf.mass(axis);
                let d = self.plan.derivative(data, axis);
                data.iter().zip(&d).map(|(z, dz)| scale * (z.conj() * dz).im).collect()
            })
            .collect()
    }
}

pub fn bohmian_velocity(wf: &WaveFunction) -> Result<VelocityField> {
    Ok(VelocityEngine::new(wf.grid())?.velocity(wf))
}

pub fn probability_current(wf: &WaveFunction) -> Result<Vec<Vec<f64>>> {
    Ok(VelocityEngine::new(wf.grid())?.current(wf))
}
