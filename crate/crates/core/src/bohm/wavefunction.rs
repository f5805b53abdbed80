use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::numerics::{ComplexField, Grid};

/// Physical constants of a simulation. `masses[k]` is the mass attached to
/// grid axis `k`; a single entry is shared by all axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Units {
    pub hbar: f64,
    pub masses: Vec<f64>,
    pub label: String,
}

impl Default for Units {
    fn default() -> Self {
        Units { hbar: 1.0, masses: vec![1.0], label: "natural (hbar = m = 1)".into() }
    }
}

impl Units {
    pub fn natural() -> Self {
        Self::default()
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return config("hbar must be positive");
        }
        if self.masses.is_empty()
            || (self.masses.len() != 1 && self.masses.len() != dims)
            || self.masses.iter().any(|m| !(*m > 0.0 && m.is_finite()))
        {
            return config("need one positive mass, or one per grid axis");
        }
        Ok(())
    }

    pub fn mass(&self, axis: usize) -> f64 {
        if self.masses.len() == 1 {
            self.masses[0]
        } else {
            self.masses[axis]
        }
    }
}

/// A normalized wave function on a periodic grid together with the
/// potential and constants that define its Hamiltonian.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    field: ComplexField,
    potential: Vec<f64>,
    units: Units,
    time: f64,
}

impl WaveFunction {
    /// Normalizes `field` on construction. An empty potential means `V = 0`.
    pub fn new(mut field: ComplexField, potential: Vec<f64>, units: Units) -> Result<Self> {
        let grid = *field.grid();
        units.validate(grid.dims())?;
        let potential = if potential.is_empty() { vec![0.0; grid.total_points()] } else { potential };
        if potential.len() != grid.total_points() {
            return config("potential must have one value per grid point");
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return domain("potential must be finite");
        }
        field.normalize()?;
        Ok(WaveFunction { field, potential, units, time: 0.0 })
    }

    pub fn free(field: ComplexField, units: Units) -> Result<Self> {
        Self::new(field, Vec::new(), units)
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn data(&self) -> &[Complex64] {
        self.field.data()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        self.field.data_mut()
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn units(&self) -> &Units {
        &self.units
    }

    pub fn mass(&self, axis: usize) -> f64 {
        self.units.mass(axis)
    }

    pub fn hbar(&self) -> f64 {
        self.units.hbar
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn advance_clock(&mut self, dt: f64) {
        self.time += dt;
    }

    pub fn density(&self) -> Vec<f64> {
        self.field.density()
    }

    pub fn norm(&self) -> f64 {
        self.field.norm()
    }

    /// `⟨x_axis⟩` and the standard deviation of `x_axis` under `|Ψ|²`,
    /// with coordinates taken relative to the grid (no unwrapping).
    pub fn position_moments(&self, axis: usize) -> (f64, f64) {
        let g = self.grid();
        let n = g.points();
        let rho = self.density();
        let dv = g.cell_volume();
        let coord = |idx: usize| g.coord(if axis == 0 { idx % n } else { idx / n });
        let mass: f64 = rho.iter().sum::<f64>() * dv;
        let mean = rho.iter().enumerate().map(|(i, r)| r * coord(i)).sum::<f64>() * dv / mass;
        let var = rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * (coord(i) - mean).powi(2))
            .sum::<f64>()
            * dv
            / mass;
        (mean, var.sqrt())
    }

    /// Probability within `cells` grid cells of the box boundary, summed over
    /// axes. Large values mean the periodic images are about to interact.
    pub fn boundary_mass(&self, cells: usize) -> f64 {
        let g = self.grid();
        let n = g.points();
        let near = |j: usize| j < cells || j >= n.saturating_sub(cells);
        self.density()
            .iter()
            .enumerate()
            .filter(|(i, _)| near(i % n) || (g.dims() == 2 && near(i / n)))
            .map(|(_, r)| r)
            .sum::<f64>()
            * g.cell_volume()
    }
}
