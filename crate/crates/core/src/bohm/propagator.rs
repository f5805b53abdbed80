use num_complex::Complex64;

use super::wavefunction::WaveFunction;
use crate::error::{config, Error, Result};
use crate::numerics::fft::unit_phase;
use crate::numerics::SpectralPlan;

/// Modes with `|k| > TAIL_FRACTION · k_Nyquist` on any axis count as the
/// spectral tail.
pub const TAIL_FRACTION: f64 = 2.0 / 3.0;
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-8;

/// Strang split-step propagator for `iħ∂_tΨ = (−ħ²∇²/2m + V)Ψ` on a
/// periodic grid: half kick, spectral drift, half kick.
#[derive(Debug, Clone)]
pub struct SplitStep {
    plan: SpectralPlan,
    dt: f64,
    half_kick: Vec<Complex64>,
    full_kick: Vec<Complex64>,
    drift: Vec<Complex64>,
    tail: Vec<bool>,
    kinetic: Vec<f64>,
    tail_threshold: f64,
}

impl SplitStep {
    /// Builds the step operators for `wf`'s Hamiltonian and checks that
    /// `wf` is resolved on its grid.
    pub fn new(wf: &WaveFunction, dt: f64) -> Result<Self> {
        Self::with_tail_threshold(wf, dt, DEFAULT_TAIL_THRESHOLD)
    }

    pub fn with_tail_threshold(wf: &WaveFunction, dt: f64, tail_threshold: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return config("time step must be positive");
        }
        if !(tail_threshold > 0.0) {
            return config("spectral tail threshold must be positive");
        }
        let grid = *wf.grid();
        let plan = SpectralPlan::new(&grid)?;
        let hbar = wf.hbar();
        let n = grid.points();
        let k = grid.wavenumbers();
        let k_cut = TAIL_FRACTION * grid.nyquist();
        let mut kinetic = Vec::with_capacity(grid.total_points());
        let mut tail = Vec::with_capacity(grid.total_points());
        for idx in 0..grid.total_points() {
            let kx = k[idx % n];
            let mut t = hbar * hbar * kx * kx / (2.0 * wf.mass(0));
            let mut out = kx.abs() > k_cut;
            if grid.dims() == 2 {
                let ky = k[idx / n];
                t += hbar * hbar * ky * ky / (2.0 * wf.mass(1));
                out |= ky.abs() > k_cut;
            }
            kinetic.push(t);
            tail.push(out);
        }
        // the unnormalized transform pair multiplies by N, a power of two,
        // so folding 1/N into the drift factors is exact
        let inv_n = 1.0 / grid.total_points() as f64;
        let drift = kinetic.iter().map(|t| unit_phase(-t * dt / hbar) * inv_n).collect();
        let half_kick = wf.potential().iter().map(|v| unit_phase(-v * dt / (2.0 * hbar))).collect();
        let full_kick = wf.potential().iter().map(|v| unit_phase(-v * dt / hbar)).collect();
        let s = SplitStep { plan, dt, half_kick, full_kick, drift, tail, kinetic, tail_threshold };
        let mut spec = wf.data().to_vec();
        s.plan.forward(&mut spec);
        s.check_tail(&spec)?;
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    fn tail_mass(&self, spectrum: &[Complex64]) -> f64 {
        let total: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum();
        let tail: f64 = spectrum
            .iter()
            .zip(&self.tail)
            .filter(|(_, &t)| t)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        tail / total
    }

    fn check_tail(&self, spectrum: &[Complex64]) -> Result<()> {
        let tail_mass = self.tail_mass(spectrum);
        if tail_mass > self.tail_threshold || !tail_mass.is_finite() {
            return Err(Error::Resolution { tail_mass, threshold: self.tail_threshold });
        }
        Ok(())
    }

    /// Fraction of `‖Ψ‖²` in the high-wavenumber tail.
    pub fn spectral_tail(&self, wf: &WaveFunction) -> f64 {
        let mut spec = wf.data().to_vec();
        self.plan.forward(&mut spec);
        self.tail_mass(&spec)
    }

    /// One step. On a resolution error `wf` is left mid-step and should be
    /// discarded.
    pub fn step(&self, wf: &mut WaveFunction) -> Result<()> {
        self.run(wf, 1)
    }

    /// `steps` steps. The closing half kick of one step and the opening half
    /// kick of the next are applied as one full kick.
    pub fn run(&self, wf: &mut WaveFunction, steps: usize) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        let data = wf.data_mut();
        mul(data, &self.half_kick);
        for i in 0..steps {
            self.plan.forward_unscaled(data);
            self.check_tail(data)?;
            mul(data, &self.drift);
            self.plan.inverse_unscaled(data);
            mul(data, if i + 1 == steps { &self.half_kick } else { &self.full_kick });
        }
        wf.advance_clock(self.dt * steps as f64);
        Ok(())
    }

    /// `⟨Ψ|H|Ψ⟩` with the kinetic term evaluated in momentum space.
    pub fn energy(&self, wf: &WaveFunction) -> f64 {
        let dv = wf.grid().cell_volume();
        let mut spec = wf.data().to_vec();
        self.plan.forward(&mut spec);
        let kinetic: f64 = spec.iter().zip(&self.kinetic).map(|(z, t)| z.norm_sqr() * t).sum();
        let potential: f64 = wf.data().iter().zip(wf.potential()).map(|(z, v)| z.norm_sqr() * v).sum();
        (kinetic + potential) * dv
    }
}

fn mul(data: &mut [Complex64], factors: &[Complex64]) {
    for (z, f) in data.iter_mut().zip(factors) {
        *z *= f;
    }
}

/// One split step of length `dt` from `wf`.
pub fn schrodinger_step(wf: &WaveFunction, dt: f64) -> Result<WaveFunction> {
    let mut out = wf.clone();
    SplitStep::new(wf, dt)?.step(&mut out)?;
    Ok(out)
}

pub fn energy_expectation(wf: &WaveFunction) -> Result<f64> {
    Ok(SplitStep::new(wf, 1.0)?.energy(wf))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::bohm::states::{free_gaussian, free_gaussian_width, harmonic_superposition, harmonic_energy};
    use crate::bohm::wavefunction::Units;
    use crate::numerics::{ComplexField, Grid};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn unit_phases_have_tight_modulus() {
        let mut worst: f64 = 0.0;
        for i in 0..10_000 {
            let z = unit_phase(0.001 * i as f64 - 3.0);
            worst = worst.max((z.norm_sqr() - 1.0).abs());
            assert!((z - Complex64::from_polar(1.0, 0.001 * i as f64 - 3.0)).norm() < 1e-15);
        }
        assert!(worst < 2.3e-16, "{worst}");
    }

    #[test]
    fn fused_run_matches_single_steps() {
        let g = Grid::one_d(256, 20.0).unwrap();
        let wf = harmonic_superposition(&g, &Units::natural(), 1.0, &[(0, c(1.0)), (2, c(0.5))]).unwrap();
        let prop = SplitStep::new(&wf, 1e-2).unwrap();
        let (mut a, mut b) = (wf.clone(), wf);
        prop.run(&mut a, 50).unwrap();
        for _ in 0..50 {
            prop.step(&mut b).unwrap();
        }
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_advances_phase_only() {
        let g = Grid::one_d(128, 10.0).unwrap();
        let k = 2.0 * PI * 3.0 / 10.0;
        let f = ComplexField::from_fn(g, |x, _| Complex64::from_polar(1.0, k * x));
        let wf = WaveFunction::free(f, Units::natural()).unwrap();
        let dt = 0.01;
        let next = schrodinger_step(&wf, dt).unwrap();
        let phase = Complex64::from_polar(1.0, -k * k * dt / 2.0);
        for (a, b) in next.data().iter().zip(wf.data()) {
            assert!((a - b * phase).norm() < 1e-13);
            assert!((a.norm() - b.norm()).abs() < 1e-13);
        }
        assert!((next.time() - dt).abs() < 1e-16);
    }

    #[test]
    fn ground_state_is_stationary_over_a_period() {
        let g = Grid::one_d(1024, 20.0).unwrap();
        let mut wf = harmonic_superposition(&g, &Units::natural(), 1.0, &[(0, c(1.0))]).unwrap();
        let rho0 = wf.density();
        let steps = 6283;
        let prop = SplitStep::new(&wf, 2.0 * PI / steps as f64).unwrap();
        prop.run(&mut wf, steps).unwrap();
        let l1: f64 = wf.density().iter().zip(&rho0).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.dx();
        assert!(l1 < 1e-6, "{l1}");
        assert!((wf.time() - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn free_gaussian_spreads_by_analytic_law() {
        let g = Grid::one_d(1024, 40.0).unwrap();
        let units = Units::natural();
        let mut wf = free_gaussian(&g, &units, 0.0, 1.0).unwrap();
        let t = 2.0;
        let prop = SplitStep::new(&wf, 1e-3).unwrap();
        prop.run(&mut wf, 2000).unwrap();
        let (_, sd) = wf.position_moments(0);
        let expect = free_gaussian_width(1.0, t, 1.0, 1.0);
        assert!((sd / expect - 1.0).abs() < 1e-3, "{sd} vs {expect}");
    }

    #[test]
    fn norm_conserved_over_many_steps() {
        let g = Grid::one_d(1024, 20.0).unwrap();
        let mut wf = harmonic_superposition(&g, &Units::natural(), 1.0, &[(0, c(1.0)), (1, c(1.0))]).unwrap();
        let prop = SplitStep::new(&wf, 1e-3).unwrap();
        prop.run(&mut wf, 100_000).unwrap();
        assert!((wf.norm() - 1.0).abs() < 1e-12, "{}", wf.norm() - 1.0);
    }

    #[test]
    fn energy_is_conserved() {
        let g = Grid::one_d(1024, 20.0).unwrap();
        let mut wf = harmonic_superposition(&g, &Units::natural(), 1.0, &[(0, c(1.0)), (1, c(1.0))]).unwrap();
        let prop = SplitStep::new(&wf, 1e-3).unwrap();
        let e0 = prop.energy(&wf);
        let exact = 0.5 * (harmonic_energy(0, 1.0, 1.0) + harmonic_energy(1, 1.0, 1.0));
        assert!((e0 - exact).abs() < 1e-10, "{e0}");
        for _ in 0..10 {
            prop.run(&mut wf, 1000).unwrap();
            assert!(((prop.energy(&wf) - e0) / e0).abs() < 1e-8);
        }
    }

    #[test]
    fn two_dimensional_free_gaussian_spreads_in_both_axes() {
        let g = Grid::two_d(128, 24.0).unwrap();
        let mut wf = free_gaussian(&g, &Units::natural(), 0.0, 1.0).unwrap();
        SplitStep::new(&wf, 1e-2).unwrap().run(&mut wf, 200).unwrap();
        let expect = free_gaussian_width(1.0, 2.0, 1.0, 1.0);
        for axis in 0..2 {
            let (_, sd) = wf.position_moments(axis);
            assert!((sd / expect - 1.0).abs() < 1e-3, "{axis}: {sd}");
        }
    }

    #[test]
    fn under_resolved_state_is_rejected() {
        let g = Grid::one_d(64, 10.0).unwrap();
        let f = ComplexField::from_fn(g, |x, _| if x.abs() < 1.0 { c(1.0) } else { c(0.0) });
        let wf = WaveFunction::free(f, Units::natural()).unwrap();
        assert!(matches!(SplitStep::new(&wf, 1e-3), Err(Error::Resolution { .. })));
    }
}
