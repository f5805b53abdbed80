use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::history::PsiHistory;
use super::velocity::{VelocityEngine, VelocityField};
use crate::error::{config, Result};
use crate::numerics::Grid;

/// Default clamp speed, in grid spacings per unit time.
pub const V_MAX_CELLS: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub v: [f64; 2],
    /// Some interpolation stencil point was masked as a node.
    pub near_node: bool,
}

/// Guiding velocity as a function of position and time.
pub trait VelocityProvider: Sync {
    fn grid(&self) -> &Grid;
    /// Closed interval of times the provider can be sampled at.
    fn time_span(&self) -> (f64, f64);
    fn sample(&self, q: [f64; 2], t: f64) -> VelocitySample;
}

/// Velocity fields of every frame of a [`PsiHistory`], interpolated
/// bilinearly in space and linearly in time.
#[derive(Debug, Clone)]
pub struct FrameVelocities {
    grid: Grid,
    t0: f64,
    interval: f64,
    fields: Vec<VelocityField>,
}

impl FrameVelocities {
    pub fn from_history(history: &PsiHistory) -> Result<Self> {
        Self::with_engine(history, &VelocityEngine::new(history.grid())?)
    }

    pub fn with_engine(history: &PsiHistory, engine: &VelocityEngine) -> Result<Self> {
        let fields = (0..history.len())
            .into_par_iter()
            .map(|k| Ok(engine.velocity(&history.wave_function(k)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameVelocities {
            grid: *history.grid(),
            t0: history.t0(),
            interval: history.frame_interval(),
            fields,
        })
    }

    pub fn fields(&self) -> &[VelocityField] {
        &self.fields
    }

    fn spatial(&self, field: &VelocityField, q: [f64; 2]) -> VelocitySample {
        let g = &self.grid;
        let n = g.points();
        let fx = g.fractional_index(q[0]);
        let ix = (fx.floor() as usize).min(n - 1);
        let wx = fx - ix as f64;
        let (ix1, mut v, mut near) = ((ix + 1) % n, [0.0; 2], false);
        if g.dims() == 1 {
            let c = field.component(0);
            v[0] = (1.0 - wx) * c[ix] + wx * c[ix1];
            near = !field.valid()[ix] || !field.valid()[ix1];
        } else {
            let fy = g.fractional_index(q[1]);
            let iy = (fy.floor() as usize).min(n - 1);
            let wy = fy - iy as f64;
            let iy1 = (iy + 1) % n;
            let stencil = [
                (g.index(ix, iy), (1.0 - wx) * (1.0 - wy)),
                (g.index(ix1, iy), wx * (1.0 - wy)),
                (g.index(ix, iy1), (1.0 - wx) * wy),
                (g.index(ix1, iy1), wx * wy),
            ];
            for (idx, w) in stencil {
                v[0] += w * field.component(0)[idx];
                v[1] += w * field.component(1)[idx];
                near |= !field.valid()[idx];
            }
        }
        VelocitySample { v, near_node: near }
    }
}

impl VelocityProvider for FrameVelocities {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn time_span(&self) -> (f64, f64) {
        (self.t0, self.t0 + self.interval * (self.fields.len() - 1) as f64)
    }

    fn sample(&self, q: [f64; 2], t: f64) -> VelocitySample {
        let last = self.fields.len() - 1;
        let s = ((t - self.t0) / self.interval).clamp(0.0, last as f64);
        let k = (s.floor() as usize).min(last);
        let w = s - k as f64;
        let a = self.spatial(&self.fields[k], q);
        if k == last || w == 0.0 {
            return a;
        }
        let b = self.spatial(&self.fields[k + 1], q);
        VelocitySample {
            v: [(1.0 - w) * a.v[0] + w * b.v[0], (1.0 - w) * a.v[1] + w * b.v[1]],
            near_node: a.near_node || b.near_node,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryOptions {
    pub dt: f64,
    /// Smallest step reached by halving near nodes; defaults to `dt / 64`.
    pub dt_min: Option<f64>,
    /// Clamp speed; defaults to [`V_MAX_CELLS`] grid spacings per unit time.
    pub v_max: Option<f64>,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions { dt: 1e-3, dt_min: None, v_max: None }
    }
}

impl TrajectoryOptions {
    pub fn with_dt(dt: f64) -> Self {
        TrajectoryOptions { dt, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityFlags {
    /// Accepted integration steps of any size.
    pub steps: u64,
    pub halvings: u64,
    /// Steps taken at `dt_min` with clamped velocities.
    pub clamps: u64,
    /// Times the configuration left the periodic box and was wrapped.
    pub wraps: u64,
}

impl QualityFlags {
    pub fn merge(&mut self, other: &QualityFlags) {
        self.steps += other.steps;
        self.halvings += other.halvings;
        self.clamps += other.clamps;
        self.wraps += other.wraps;
    }

    pub fn clamp_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.clamps as f64 / self.steps as f64
        }
    }
}

/// Configuration recorded at each requested output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub flags: QualityFlags,
}

struct Stepper<'a, P: VelocityProvider + ?Sized> {
    provider: &'a P,
    dt_min: f64,
    v_max: f64,
    flags: QualityFlags,
}

impl<P: VelocityProvider + ?Sized> Stepper<'_, P> {
    fn velocity(&self, q: [f64; 2], t: f64, clamp: bool) -> ([f64; 2], bool) {
        let s = self.provider.sample(q, t);
        let mut v = s.v;
        if clamp {
            for c in &mut v {
                *c = c.clamp(-self.v_max, self.v_max);
            }
        }
        (v, s.near_node)
    }

    fn rk4(&self, q: [f64; 2], t: f64, h: f64, clamp: bool) -> ([f64; 2], bool) {
        let add = |q: [f64; 2], k: [f64; 2], s: f64| [q[0] + s * k[0], q[1] + s * k[1]];
        let (k1, n1) = self.velocity(q, t, clamp);
        let (k2, n2) = self.velocity(add(q, k1, 0.5 * h), t + 0.5 * h, clamp);
        let (k3, n3) = self.velocity(add(q, k2, 0.5 * h), t + 0.5 * h, clamp);
        let (k4, n4) = self.velocity(add(q, k3, h), t + h, clamp);
        let out = [
            q[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            q[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        (out, n1 || n2 || n3 || n4)
    }

    /// Covers `[t, t + h]`, halving near nodes down to `dt_min`.
    fn advance(&mut self, q: [f64; 2], t: f64, h: f64) -> [f64; 2] {
        let (next, near) = self.rk4(q, t, h, false);
        if !near {
            self.flags.steps += 1;
            return self.wrap(next);
        }
        if 0.5 * h >= self.dt_min {
            self.flags.halvings += 1;
            let mid = self.advance(q, t, 0.5 * h);
            return self.advance(mid, t + 0.5 * h, 0.5 * h);
        }
        self.flags.steps += 1;
        self.flags.clamps += 1;
        let (next, _) = self.rk4(q, t, h, true);
        self.wrap(next)
    }

    fn wrap(&mut self, q: [f64; 2]) -> [f64; 2] {
        let g = self.provider.grid();
        let mut out = q;
        let half = 0.5 * g.length();
        for c in out.iter_mut().take(g.dims()) {
            if !(-half..half).contains(c) {
                self.flags.wraps += 1;
                *c = g.wrap(*c);
            }
        }
        out
    }
}

fn check_times<P: VelocityProvider + ?Sized>(provider: &P, t_start: f64, outputs: &[f64], opts: &TrajectoryOptions) -> Result<()> {
    if !(opts.dt > 0.0) || opts.dt_min.is_some_and(|m| !(m > 0.0 && m <= opts.dt)) {
        return config("need dt > 0 and 0 < dt_min ≤ dt");
    }
    if opts.v_max.is_some_and(|v| !(v > 0.0)) {
        return config("clamp speed must be positive");
    }
    let (lo, hi) = provider.time_span();
    let slack = 1e-9 * (hi - lo).abs().max(1.0);
    let mut prev = t_start;
    for &t in outputs {
        if t < prev {
            return config("output times must be non-decreasing and not before the start");
        }
        prev = t;
    }
    if t_start < lo - slack || prev > hi + slack {
        return config(format!("trajectory times [{t_start}, {prev}] exceed the velocity data span [{lo}, {hi}]"));
    }
    Ok(())
}

/// Integrates `Q̇ = v(Q, t)` with RK4 from `(q0, t_start)`, recording the
/// configuration at each of `outputs` (non-decreasing, ≥ `t_start`).
pub fn integrate_path<P: VelocityProvider + ?Sized>(
    provider: &P,
    q0: [f64; 2],
    t_start: f64,
    outputs: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    check_times(provider, t_start, outputs, opts)?;
    let dx = provider.grid().dx();
    let mut stepper = Stepper {
        provider,
        dt_min: opts.dt_min.unwrap_or(opts.dt / 64.0),
        v_max: opts.v_max.unwrap_or(V_MAX_CELLS * dx),
        flags: QualityFlags::default(),
    };
    let mut q = stepper.wrap(q0);
    stepper.flags.wraps = 0;
    let mut t = t_start;
    let mut points = Vec::with_capacity(outputs.len());
    for &target in outputs {
        // step counts are computed from the interval so that repeated
        // additions of dt never drift past the target
        let span = target - t;
        let n = (span / opts.dt - 1e-9).ceil().max(0.0) as usize;
        for i in 0..n {
            let a = t + span * i as f64 / n as f64;
            let b = t + span * (i + 1) as f64 / n as f64;
            q = stepper.advance(q, a, b - a);
        }
        t = target;
        points.push(q);
    }
    Ok(Trajectory { times: outputs.to_vec(), points, flags: stepper.flags })
}

/// Trajectory from `t_start` to `t_final` recorded at every step of `opts.dt`.
pub fn advance_trajectory<P: VelocityProvider + ?Sized>(
    provider: &P,
    q0: [f64; 2],
    t_start: f64,
    t_final: f64,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    if !(t_final >= t_start) || !(opts.dt > 0.0) {
        return config("need t_final ≥ t_start and dt > 0");
    }
    let n = ((t_final - t_start) / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let mut outputs: Vec<f64> = (0..=n)
        .map(|i| if n == 0 { t_start } else { t_start + (t_final - t_start) * i as f64 / n as f64 })
        .collect();
    if n == 0 {
        outputs.truncate(1);
    }
    integrate_path(provider, q0, t_start, &outputs, opts)
}

/// [`integrate_path`] for every start, in parallel; the result order follows
/// `starts`.
pub fn advance_ensemble<P: VelocityProvider + ?Sized>(
    provider: &P,
    starts: &[[f64; 2]],
    t_start: f64,
    outputs: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Vec<Trajectory>> {
    check_times(provider, t_start, outputs, opts)?;
    starts
        .par_iter()
        .map(|&q0| integrate_path(provider, q0, t_start, outputs, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;
    use crate::bohm::propagator::SplitStep;
    use crate::bohm::states::{free_gaussian, free_gaussian_width, harmonic_superposition};
    use crate::bohm::wavefunction::Units;

    struct Linear {
        grid: Grid,
        rate: f64,
    }

    impl VelocityProvider for Linear {
        fn grid(&self) -> &Grid {
            &self.grid
        }
        fn time_span(&self) -> (f64, f64) {
            (0.0, 10.0)
        }
        fn sample(&self, q: [f64; 2], _t: f64) -> VelocitySample {
            VelocitySample { v: [self.rate * q[0], 0.0], near_node: q[0].abs() < 0.01 }
        }
    }

    #[test]
    fn rk4_solves_exponential_growth() {
        let p = Linear { grid: Grid::one_d(64, 100.0).unwrap(), rate: 0.5 };
        let tr = advance_trajectory(&p, [1.0, 0.0], 0.0, 2.0, &TrajectoryOptions::with_dt(0.01)).unwrap();
        assert_eq!(tr.points.len(), 201);
        assert!((tr.points[200][0] - 1f64.exp()).abs() < 1e-9);
        assert_eq!(tr.flags.steps, 200);
        assert_eq!(tr.flags.clamps, 0);
    }

    #[test]
    fn near_node_halves_then_clamps() {
        let p = Linear { grid: Grid::one_d(64, 100.0).unwrap(), rate: 0.5 };
        let opts = TrajectoryOptions { dt: 0.1, dt_min: Some(0.1 / 8.0), v_max: None };
        let tr = integrate_path(&p, [0.001, 0.0], 0.0, &[0.1], &opts).unwrap();
        assert_eq!(tr.flags.halvings, 1 + 2 + 4);
        assert_eq!(tr.flags.clamps, 8);
        assert_eq!(tr.flags.steps, 8);
    }

    #[test]
    fn leaving_the_box_wraps() {
        let p = Linear { grid: Grid::one_d(64, 10.0).unwrap(), rate: 1.0 };
        let tr = integrate_path(&p, [4.8, 0.0], 0.0, &[0.1], &TrajectoryOptions::with_dt(0.1)).unwrap();
        assert!(tr.flags.wraps == 1 && tr.points[0][0] < 0.0);
    }

    #[test]
    fn out_of_span_times_rejected() {
        let p = Linear { grid: Grid::one_d(64, 10.0).unwrap(), rate: 1.0 };
        assert!(integrate_path(&p, [1.0, 0.0], 0.0, &[11.0], &TrajectoryOptions::default()).is_err());
        assert!(integrate_path(&p, [1.0, 0.0], 1.0, &[0.5], &TrajectoryOptions::default()).is_err());
    }

    fn gaussian_velocities(t_final: f64) -> FrameVelocities {
        let g = Grid::one_d(1024, 60.0).unwrap();
        let wf = free_gaussian(&g, &Units::natural(), 0.0, 1.0).unwrap();
        let prop = SplitStep::new(&wf, 1e-3).unwrap();
        let frames = (t_final / 0.01).round() as usize + 1;
        FrameVelocities::from_history(&PsiHistory::record(&wf, &prop, 10, frames).unwrap()).unwrap()
    }

    #[test]
    fn free_gaussian_trajectories_scale_with_width() {
        let v = gaussian_velocities(4.0);
        let opts = TrajectoryOptions::with_dt(1e-3);
        for q0 in [-2.0, -1.3, -0.5, 0.2, 1.0, 1.9] {
            let tr = integrate_path(&v, [q0, 0.0], 0.0, &[1.0, 2.0, 4.0], &opts).unwrap();
            for (t, q) in tr.times.iter().zip(&tr.points) {
                let expect = q0 * free_gaussian_width(1.0, *t, 1.0, 1.0);
                assert!((q[0] / expect - 1.0).abs() < 5e-3, "q0={q0} t={t}: {} vs {expect}", q[0]);
            }
        }
    }

    #[test]
    fn ground_state_particles_stand_still() {
        let g = Grid::one_d(512, 20.0).unwrap();
        let wf = harmonic_superposition(&g, &Units::natural(), 1.0, &[(0, Complex64::new(1.0, 0.0))]).unwrap();
        let prop = SplitStep::new(&wf, 1e-3).unwrap();
        let v = FrameVelocities::from_history(&PsiHistory::record(&wf, &prop, 10, 101).unwrap()).unwrap();
        let tr = advance_trajectory(&v, [0.37, 0.0], 0.0, 1.0, &TrajectoryOptions::with_dt(1e-2)).unwrap();
        let worst = tr.points.iter().map(|q| (q[0] - 0.37).abs()).fold(0.0, f64::max);
        // the split-step ground state differs from the exact one at O(dt²)
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn one_dimensional_paths_never_cross() {
        let g = Grid::one_d(1024, 20.0).unwrap();
        let c = Complex64::new(1.0, 0.0);
        let wf = harmonic_superposition(&g, &Units::natural(), 1.0, &[(0, c), (1, c)]).unwrap();
        let prop = SplitStep::new(&wf, 1e-3).unwrap();
        let v = FrameVelocities::from_history(&PsiHistory::record(&wf, &prop, 10, 315).unwrap()).unwrap();
        let starts: Vec<[f64; 2]> = (0..100).map(|i| [-2.5 + 0.05 * i as f64, 0.0]).collect();
        let outputs: Vec<f64> = (1..=31).map(|k| 0.1 * k as f64).collect();
        let opts = TrajectoryOptions::with_dt(1e-3);
        let paths = advance_ensemble(&v, &starts, 0.0, &outputs, &opts).unwrap();
        for k in 0..outputs.len() {
            for w in paths.windows(2) {
                assert!(w[0].points[k][0] < w[1].points[k][0], "crossing at t={}", outputs[k]);
            }
        }
        // bit-identical on rerun
        let again = advance_ensemble(&v, &starts, 0.0, &outputs, &opts).unwrap();
        assert_eq!(paths, again);
    }
}
