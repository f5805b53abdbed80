use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Below this separation an inverse-distance interaction is singular.
const MIN_SEPARATION: f64 = 1e-12;

/// Positions and momenta of `N` particles in `d` dimensions, flattened
/// particle-major (`q[i*d + k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microstate {
    dims: usize,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl Microstate {
    pub fn new(dims: usize, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if dims == 0 || q.len() != p.len() || q.len() % dims != 0 {
            return config(format!(
                "position ({}) and momentum ({}) arrays must both be N×{dims}",
                q.len(),
                p.len()
            ));
        }
        Ok(Microstate { dims, q, p })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn particles(&self) -> usize {
        self.q.len() / self.dims
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q_mut(&mut self) -> &mut [f64] {
        &mut self.q
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.q[i * self.dims..(i + 1) * self.dims]
    }

    pub fn momentum(&self, i: usize) -> &[f64] {
        &self.p[i * self.dims..(i + 1) * self.dims]
    }

    /// Phase-space point as `(q, p)` concatenated.
    pub fn phase_point(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    pub fn from_phase_point(dims: usize, x: &[f64]) -> Result<Self> {
        let half = x.len() / 2;
        Self::new(dims, x[..half].to_vec(), x[half..].to_vec())
    }

    /// Negates all momenta (time reversal).
    pub fn reverse(&mut self) {
        for p in &mut self.p {
            *p = -*p;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PairInteraction {
    None,
    /// `V = strength / r`
    InverseDistance { strength: f64 },
    /// `V = stiffness r² / 2`
    Harmonic { stiffness: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExternalPotential {
    /// `V = m g q_last` (gravity along the last axis).
    UniformGravity { g: f64 },
    /// `V = stiffness |q|² / 2`
    HarmonicTrap { stiffness: f64 },
    /// Perfectly reflecting walls of the box `[0, extents_k]`.
    HardWalls { extents: Vec<f64> },
    /// `V = −strength m / |q − centre|`
    PointAttractor { centre: Vec<f64>, strength: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSystem {
    dims: usize,
    masses: Vec<f64>,
    pair: PairInteraction,
    external: Vec<ExternalPotential>,
}

impl HamiltonianSystem {
    pub fn new(
        dims: usize,
        masses: Vec<f64>,
        pair: PairInteraction,
        external: Vec<ExternalPotential>,
    ) -> Result<Self> {
        if dims == 0 {
            return config("spatial dimension must be positive");
        }
        if masses.is_empty() || masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return config("masses must be positive");
        }
        let walls = external
            .iter()
            .filter(|e| matches!(e, ExternalPotential::HardWalls { .. }))
            .count();
        if walls > 1 {
            return config("at most one set of hard walls");
        }
        for e in &external {
            match e {
                ExternalPotential::HardWalls { extents } => {
                    if extents.len() != dims || extents.iter().any(|x| !(*x > 0.0)) {
                        return config("hard-wall extents must be positive, one per axis");
                    }
                }
                ExternalPotential::PointAttractor { centre, .. } if centre.len() != dims => {
                    return config("attractor centre must have one coordinate per axis");
                }
                _ => {}
            }
        }
        Ok(HamiltonianSystem { dims, masses, pair, external })
    }

    /// `n` identical non-interacting particles.
    pub fn free(dims: usize, n: usize, mass: f64) -> Result<Self> {
        Self::new(dims, vec![mass; n], PairInteraction::None, Vec::new())
    }

    /// One particle of mass `mass` in a harmonic trap of stiffness `k`.
    pub fn harmonic_oscillator(dims: usize, mass: f64, k: f64) -> Result<Self> {
        Self::new(
            dims,
            vec![mass],
            PairInteraction::None,
            vec![ExternalPotential::HarmonicTrap { stiffness: k }],
        )
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn particles(&self) -> usize {
        self.masses.len()
    }

    pub fn pair(&self) -> &PairInteraction {
        &self.pair
    }

    pub fn external(&self) -> &[ExternalPotential] {
        &self.external
    }

    pub fn walls(&self) -> Option<&[f64]> {
        self.external.iter().find_map(|e| match e {
            ExternalPotential::HardWalls { extents } => Some(extents.as_slice()),
            _ => None,
        })
    }

    pub fn has_singular_terms(&self) -> bool {
        matches!(self.pair, PairInteraction::InverseDistance { .. })
            || self
                .external
                .iter()
                .any(|e| matches!(e, ExternalPotential::PointAttractor { .. }))
    }

    /// Largest stable velocity-Verlet step, `2/ω_max` over the harmonic
    /// terms; `None` when no harmonic term is present.
    pub fn stability_bound(&self) -> Option<f64> {
        let m_min = self.masses.iter().copied().fold(f64::INFINITY, f64::min);
        let mut omega2: f64 = 0.0;
        if let PairInteraction::Harmonic { stiffness } = self.pair {
            if self.masses.len() > 1 {
                // reduced mass is at least m_min / 2
                omega2 = omega2.max(2.0 * stiffness / m_min);
            }
        }
        for e in &self.external {
            if let ExternalPotential::HarmonicTrap { stiffness } = e {
                omega2 = omega2.max(stiffness / m_min);
            }
        }
        (omega2 > 0.0).then(|| 2.0 / omega2.sqrt())
    }

    pub(crate) fn check_shape(&self, state: &Microstate) -> Result<()> {
        if state.dims() != self.dims || state.particles() != self.particles() {
            return config(format!(
                "state has {} particles in {}D, system has {} in {}D",
                state.particles(),
                state.dims(),
                self.particles(),
                self.dims
            ));
        }
        Ok(())
    }

    pub fn kinetic_energy(&self, state: &Microstate) -> f64 {
        let d = self.dims;
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| state.p[i * d..(i + 1) * d].iter().map(|p| p * p).sum::<f64>() / (2.0 * m))
            .sum()
    }

    pub fn potential_energy(&self, state: &Microstate) -> Result<f64> {
        let d = self.dims;
        let n = self.particles();
        let q = &state.q;
        let mut v = 0.0;
        match self.pair {
            PairInteraction::None => {}
            PairInteraction::InverseDistance { strength } => {
                for i in 0..n {
                    for j in i + 1..n {
                        let r = distance(&q[i * d..(i + 1) * d], &q[j * d..(j + 1) * d]);
                        if r < MIN_SEPARATION {
                            return Err(Error::Singularity(format!(
                                "particles {i} and {j} coincide"
                            )));
                        }
                        v += strength / r;
                    }
                }
            }
            PairInteraction::Harmonic { stiffness } => {
                for i in 0..n {
                    for j in i + 1..n {
                        let r = distance(&q[i * d..(i + 1) * d], &q[j * d..(j + 1) * d]);
                        v += 0.5 * stiffness * r * r;
                    }
                }
            }
        }
        for e in &self.external {
            for (i, m) in self.masses.iter().enumerate() {
                let qi = &q[i * d..(i + 1) * d];
                match e {
                    ExternalPotential::UniformGravity { g } => v += m * g * qi[d - 1],
                    ExternalPotential::HarmonicTrap { stiffness } => {
                        v += 0.5 * stiffness * qi.iter().map(|x| x * x).sum::<f64>()
                    }
                    ExternalPotential::HardWalls { .. } => {}
                    ExternalPotential::PointAttractor { centre, strength } => {
                        let r = distance(qi, centre);
                        if r < MIN_SEPARATION {
                            return Err(Error::Singularity(format!(
                                "particle {i} sits on the attractor"
                            )));
                        }
                        v -= strength * m / r;
                    }
                }
            }
        }
        Ok(v)
    }

    /// `H(q, p)`: kinetic plus potential energy.
    pub fn energy(&self, state: &Microstate) -> Result<f64> {
        self.check_shape(state)?;
        Ok(self.kinetic_energy(state) + self.potential_energy(state)?)
    }

    /// Writes `−∂V/∂q` into `out`.
    pub fn forces(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dims;
        let n = self.particles();
        out.iter_mut().for_each(|f| *f = 0.0);
        match self.pair {
            PairInteraction::None => {}
            PairInteraction::InverseDistance { strength } => {
                for i in 0..n {
                    for j in i + 1..n {
                        let r = distance(&q[i * d..(i + 1) * d], &q[j * d..(j + 1) * d]);
                        if r < MIN_SEPARATION {
                            return Err(Error::Singularity(format!(
                                "particles {i} and {j} coincide"
                            )));
                        }
                        let s = strength / (r * r * r);
                        for k in 0..d {
                            let f = s * (q[i * d + k] - q[j * d + k]);
                            out[i * d + k] += f;
                            out[j * d + k] -= f;
                        }
                    }
                }
            }
            PairInteraction::Harmonic { stiffness } => {
                for i in 0..n {
                    for j in i + 1..n {
                        for k in 0..d {
                            let f = -stiffness * (q[i * d + k] - q[j * d + k]);
                            out[i * d + k] += f;
                            out[j * d + k] -= f;
                        }
                    }
                }
            }
        }
        for e in &self.external {
            for (i, m) in self.masses.iter().enumerate() {
                let qi = &q[i * d..(i + 1) * d];
                let fi = &mut out[i * d..(i + 1) * d];
                match e {
                    ExternalPotential::UniformGravity { g } => fi[d - 1] -= m * g,
                    ExternalPotential::HarmonicTrap { stiffness } => {
                        for k in 0..d {
                            fi[k] -= stiffness * qi[k];
                        }
                    }
                    ExternalPotential::HardWalls { .. } => {}
                    ExternalPotential::PointAttractor { centre, strength } => {
                        let r = distance(qi, centre);
                        if r < MIN_SEPARATION {
                            return Err(Error::Singularity(format!(
                                "particle {i} sits on the attractor"
                            )));
                        }
                        let s = strength * m / (r * r * r);
                        for k in 0..d {
                            fi[k] -= s * (qi[k] - centre[k]);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
