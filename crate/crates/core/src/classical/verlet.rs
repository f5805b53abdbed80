use super::system::{HamiltonianSystem, Microstate};
use crate::error::{config, Error, Result};

/// Default bound on the relative energy change of a single step.
pub const DEFAULT_ENERGY_JUMP: f64 = 0.5;

/// Velocity Verlet (kick–drift–kick) with specular reflection at hard walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verlet {
    dt: f64,
    energy_jump: Option<f64>,
}

impl Verlet {
    pub fn new(dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return config(format!("time step must be positive, got {dt}"));
        }
        Ok(Verlet { dt, energy_jump: None })
    }

    /// Fails a step whose relative energy change exceeds `limit`.
    pub fn with_energy_check(mut self, limit: f64) -> Self {
        self.energy_jump = Some(limit);
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Rejects steps at or beyond the harmonic stability bound.
    pub fn check_stability(&self, system: &HamiltonianSystem) -> Result<()> {
        match system.stability_bound() {
            Some(bound) if self.dt >= bound => config(format!(
                "time step {} exceeds the stability bound {bound}",
                self.dt
            )),
            _ => Ok(()),
        }
    }

    /// Advances `state` by one step. `forces` must hold the forces at the
    /// current positions on entry and holds those at the new positions on
    /// return.
    pub fn step_in_place(
        &self,
        system: &HamiltonianSystem,
        state: &mut Microstate,
        forces: &mut [f64],
    ) -> Result<()> {
        let before = match self.energy_jump {
            Some(_) => Some(system.energy(state)?),
            None => None,
        };
        let d = system.dims();
        let half = 0.5 * self.dt;
        for (p, f) in state.p_mut().iter_mut().zip(forces.iter()) {
            *p += half * f;
        }
        {
            let (dt, masses) = (self.dt, system.masses());
            let p = state.p().to_vec();
            for (k, q) in state.q_mut().iter_mut().enumerate() {
                *q += dt * p[k] / masses[k / d];
            }
        }
        if let Some(extents) = system.walls() {
            reflect(state, extents);
        }
        system.forces(state.q(), forces)?;
        for (p, f) in state.p_mut().iter_mut().zip(forces.iter()) {
            *p += half * f;
        }
        if let (Some(h0), Some(limit)) = (before, self.energy_jump) {
            let h1 = system.energy(state)?;
            let scale = h0.abs().max(system.kinetic_energy(state)).max(f64::MIN_POSITIVE);
            if (h1 - h0).abs() > limit * scale || !h1.is_finite() {
                return Err(Error::Integration(format!(
                    "energy jumped from {h0} to {h1} in one step of {}",
                    self.dt
                )));
            }
        }
        Ok(())
    }

    /// `steps` steps from `state`.
    pub fn run(
        &self,
        system: &HamiltonianSystem,
        state: &Microstate,
        steps: usize,
    ) -> Result<Microstate> {
        system.check_shape(state)?;
        self.check_stability(system)?;
        let mut s = state.clone();
        let mut f = vec![0.0; s.q().len()];
        system.forces(s.q(), &mut f)?;
        for _ in 0..steps {
            self.step_in_place(system, &mut s, &mut f)?;
        }
        Ok(s)
    }
}

/// Folds positions back into `[0, L_k]`, flipping the momentum once per
/// bounce. For the straight-line drift of a Verlet step this is the exact
/// specular reflection path.
fn reflect(state: &mut Microstate, extents: &[f64]) {
    let d = extents.len();
    let n = state.particles();
    for i in 0..n {
        for (k, &len) in extents.iter().enumerate() {
            let idx = i * d + k;
            let mut x = state.q()[idx];
            let mut flips = 0u32;
            while x < 0.0 || x > len {
                x = if x < 0.0 { -x } else { 2.0 * len - x };
                flips += 1;
            }
            state.q_mut()[idx] = x;
            if flips % 2 == 1 {
                state.p_mut()[idx] = -state.p()[idx];
            }
        }
    }
}

/// One velocity-Verlet step with the default energy-jump guard.
pub fn verlet_step(system: &HamiltonianSystem, state: &Microstate, dt: f64) -> Result<Microstate> {
    Verlet::new(dt)?
        .with_energy_check(DEFAULT_ENERGY_JUMP)
        .run(system, state, 1)
}
