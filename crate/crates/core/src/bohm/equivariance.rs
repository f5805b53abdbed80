use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::history::PsiHistory;
use super::propagator::SplitStep;
use super::states::harmonic_superposition;
use super::trajectory::{advance_ensemble, FrameVelocities, QualityFlags, TrajectoryOptions};
use super::wavefunction::Units;
use crate::error::{config, Result};
use crate::numerics::{
    l1_distance, AxisBinning, BinnedMass, Binning, CellSampler, EmpiricalDistribution, Grid, RngStream,
    DEFAULT_TAU,
};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

/// Initial wave function: equal-weight superposition of oscillator levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub levels: Vec<usize>,
    pub omega: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState { levels: vec![0, 1], omega: 1.0 }
    }
}

impl InitialState {
    /// Smallest period after which `|Ψ_t|²` repeats: `2π / (ω · gcd Δn)`.
    pub fn beat_period(&self) -> f64 {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let base = self.levels.iter().copied().min().unwrap_or(0);
        let g = self.levels.iter().fold(0, |acc, &n| gcd(acc, n - base));
        2.0 * PI / (self.omega * g.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivarianceSpec {
    pub grid_points: usize,
    pub length: f64,
    pub units: Units,
    pub state: InitialState,
    pub n_samples: usize,
    pub checkpoints: usize,
    /// Defaults to one beat period of the initial state.
    pub duration: Option<f64>,
    pub dt: f64,
    pub frame_stride: usize,
    pub trajectory_dt: f64,
    pub bins: usize,
    /// Histograms cover `[-bin_range, bin_range]`, plus an overflow bin.
    pub bin_range: f64,
    pub l1_limit: f64,
    pub max_clamp_rate: f64,
    pub noise_quantile: f64,
    pub noise_trials: usize,
    pub noise_band_factor: f64,
    pub bundle_size: usize,
    pub tau: f64,
}

impl Default for EquivarianceSpec {
    fn default() -> Self {
        EquivarianceSpec {
            grid_points: 1024,
            length: 20.0,
            units: Units::natural(),
            state: InitialState::default(),
            n_samples: 10_000,
            checkpoints: 8,
            duration: None,
            dt: 1e-3,
            frame_stride: 10,
            trajectory_dt: 5e-3,
            bins: 24,
            bin_range: 4.0,
            l1_limit: 0.05,
            max_clamp_rate: 1e-3,
            noise_quantile: 0.99,
            noise_trials: 500,
            noise_band_factor: 3.0,
            bundle_size: 40,
            tau: DEFAULT_TAU,
        }
    }
}

impl EquivarianceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.state.levels.is_empty() || !(self.state.omega > 0.0) {
            return config("initial state needs at least one level and ω > 0");
        }
        if self.n_samples == 0 || self.checkpoints == 0 || self.frame_stride == 0 || self.bins == 0 {
            return config("samples, checkpoints, frame stride and bins must be positive");
        }
        if !(self.dt > 0.0) || !(self.trajectory_dt > 0.0) || self.duration.is_some_and(|d| !(d > 0.0)) {
            return config("time steps and duration must be positive");
        }
        if !(self.bin_range > 0.0 && self.bin_range < 0.5 * self.length) {
            return config("histogram range must lie inside the box");
        }
        if !(0.0..1.0).contains(&self.noise_quantile) || self.noise_trials == 0 {
            return config("noise quantile must lie in [0, 1) with at least one trial");
        }
        Ok(())
    }
}

/// Samples `Q₀ ~ |Ψ₀|²`, transports the samples along Bohmian trajectories,
/// and compares their histogram with `|Ψ_t|²` at each checkpoint.
pub fn equivariance_check(spec: &EquivarianceSpec, seed: u64) -> Result<ExperimentRun> {
    spec.validate()?;
    let grid = Grid::one_d(spec.grid_points, spec.length)?;
    let coeffs: Vec<(usize, Complex64)> = spec.state.levels.iter().map(|&n| (n, Complex64::new(1.0, 0.0))).collect();
    let wf = harmonic_superposition(&grid, &spec.units, spec.state.omega, &coeffs)?;
    let duration = spec.duration.unwrap_or_else(|| spec.state.beat_period());

    // frame count is a multiple of the checkpoint count so that every
    // checkpoint falls on a stored frame
    let per_checkpoint = (duration / (spec.checkpoints as f64 * spec.dt * spec.frame_stride as f64)).ceil().max(1.0) as usize;
    let intervals = per_checkpoint * spec.checkpoints;
    let dt = duration / (intervals * spec.frame_stride) as f64;
    let prop = SplitStep::new(&wf, dt)?;
    let history = PsiHistory::record(&wf, &prop, spec.frame_stride, intervals + 1)?;
    let velocities = FrameVelocities::from_history(&history)?;

    let root = RngStream::new(seed, 0);
    let starts = CellSampler::new(&grid, &wf.density())?.sample(spec.n_samples, root.child(0));
    let outputs_per_checkpoint = 8;
    let outputs: Vec<f64> = (1..=spec.checkpoints * outputs_per_checkpoint)
        .map(|i| duration * i as f64 / (spec.checkpoints * outputs_per_checkpoint) as f64)
        .collect();
    let opts = TrajectoryOptions::with_dt(spec.trajectory_dt);
    let paths = advance_ensemble(&velocities, &starts, 0.0, &outputs, &opts)?;
    let mut flags = QualityFlags::default();
    for p in &paths {
        flags.merge(&p.flags);
    }

    let binning = Binning::one_d(AxisBinning::cell_aligned(&grid, -spec.bin_range, spec.bin_range, spec.bins)?);
    let target_at = |frame: usize| -> Result<BinnedMass> {
        let rho: Vec<f64> = history.frame(frame).iter().map(|z| z.norm_sqr()).collect();
        BinnedMass::from_grid_density(binning.clone(), &grid, &rho)
    };
    let n = spec.n_samples as u64;

    let mut report = ExperimentReport::new("equivariance", seed, serde_json::to_value(spec).expect("spec serializes"));
    let mut table = DataTable::new(
        "l1_checkpoints",
        "equivariance: histogram of transported samples vs |psi_t|^2",
        &["t", "l1", "noise_quantile"],
    );

    let target0 = target_at(0)?;
    let empirical0 = EmpiricalDistribution::from_points(binning.clone(), starts.iter().map(|q| &q[..1])).masses()?;
    let l1_0 = l1_distance(&empirical0, &target0)?;
    let noise0 = crate::numerics::l1_noise_quantile(&target0, n, spec.noise_quantile, spec.noise_trials, root.child(1))?;
    table.push(vec![0.0, l1_0, noise0]);
    report.push(Metric::info("l1[t=0]", l1_0));
    report.push(Metric::info("noise_quantile[t=0]", noise0));
    report.push(Metric::flag("initial_sample_within_noise", l1_0 <= noise0));
    let band = spec.noise_band_factor * noise0;
    let mut within_band = true;
    let mut last_hist = (target0.clone(), empirical0);
    for k in 1..=spec.checkpoints {
        let frame = k * per_checkpoint;
        let out_idx = k * outputs_per_checkpoint - 1;
        let t = history.frame_time(frame);
        let target = target_at(frame)?;
        let empirical =
            EmpiricalDistribution::from_points(binning.clone(), paths.iter().map(|p| &p.points[out_idx][..1])).masses()?;
        let l1 = l1_distance(&empirical, &target)?;
        let noise = crate::numerics::l1_noise_quantile(&target, n, spec.noise_quantile, spec.noise_trials, root.child(1 + k as u64))?;
        table.push(vec![t, l1, noise]);
        report.push(Metric::below(format!("l1[t={t:.4}]"), l1, spec.l1_limit));
        within_band &= l1 <= band;
        last_hist = (target, empirical);
    }
    report.push(Metric::flag("within_initial_noise_band", within_band));
    report.push(Metric::below("node_clamp_rate", flags.clamp_rate(), spec.max_clamp_rate));
    report.push(Metric::info("step_halvings", flags.halvings as f64));
    report.push(Metric::info("box_wraps", flags.wraps as f64));
    if flags.clamp_rate() > spec.max_clamp_rate {
        report.flags.push(format!(
            "unreliable: node clamps on {:.3e} of steps exceed {:.1e}",
            flags.clamp_rate(),
            spec.max_clamp_rate
        ));
    }
    if flags.wraps > 0 {
        report.flags.push(format!("{} trajectory wraps across the periodic box", flags.wraps));
    }
    report.notes.push(format!(
        "{} trajectories over t in [0, {duration:.4}]: {} steps, {} halvings, {} clamps",
        spec.n_samples, flags.steps, flags.halvings, flags.clamps
    ));

    let edges = binning.axes()[0].edges().to_vec();
    let mut hist = DataTable::new(
        "final_histogram",
        "bin masses at the last checkpoint: transported samples vs |psi_t|^2",
        &["bin_lo", "bin_hi", "empirical", "target"],
    );
    for b in 0..edges.len() - 1 {
        hist.push(vec![edges[b], edges[b + 1], last_hist.1.masses()[b], last_hist.0.masses()[b]]);
    }
    let mut bundle = DataTable::new(
        "trajectory_bundle",
        "sample Bohmian trajectories x(t)",
        &std::iter::once("t").chain((0..spec.bundle_size.min(paths.len())).map(|_| "x")).collect::<Vec<_>>(),
    );
    let shown = spec.bundle_size.min(paths.len());
    bundle.push(std::iter::once(0.0).chain(starts[..shown].iter().map(|q| q[0])).collect());
    for (i, t) in outputs.iter().enumerate() {
        bundle.push(std::iter::once(*t).chain(paths[..shown].iter().map(|p| p.points[i][0])).collect());
    }

    let step_points = |m: &BinnedMass| -> Vec<(f64, f64)> {
        (0..edges.len() - 1)
            .map(|b| (0.5 * (edges[b] + edges[b + 1]), m.masses()[b] / (edges[b + 1] - edges[b])))
            .collect()
    };
    let mut run = ExperimentRun::new(report);
    run.plots.push(
        Plot::new("final_histogram", "Transported samples vs |psi_t|^2", "x", "density")
            .with(Series::new("samples", SeriesStyle::Steps, step_points(&last_hist.1)))
            .with(Series::new("|psi_t|^2", SeriesStyle::Line, step_points(&last_hist.0))),
    );
    let mut plot = Plot::new("trajectory_bundle", "Bohmian trajectories", "t", "x");
    for (j, p) in paths[..shown].iter().enumerate() {
        let pts = std::iter::once((0.0, starts[j][0]))
            .chain(outputs.iter().zip(&p.points).map(|(t, q)| (*t, q[0])))
            .collect();
        plot = plot.with(Series::new("", SeriesStyle::Line, pts));
    }
    run.plots.push(plot);
    run.plots.push(
        Plot::new("l1_checkpoints", "L1 distance at checkpoints", "t", "L1")
            .with(Series::new("l1", SeriesStyle::Points, table.rows.iter().map(|r| (r[0], r[1])).collect()))
            .with(Series::new("noise quantile", SeriesStyle::Line, table.rows.iter().map(|r| (r[0], r[2])).collect())),
    );
    run.add_table(table);
    run.add_table(hist);
    run.add_table(bundle);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beat_periods() {
        assert!((InitialState::default().beat_period() - 2.0 * PI).abs() < 1e-15);
        let s = InitialState { levels: vec![1, 3, 5], omega: 2.0 };
        assert!((s.beat_period() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ground_state_stays_at_noise_level() {
        let spec = EquivarianceSpec {
            state: InitialState { levels: vec![0], omega: 1.0 },
            n_samples: 4000,
            checkpoints: 4,
            duration: Some(1.0),
            noise_trials: 200,
            ..Default::default()
        };
        let run = equivariance_check(&spec, 3).unwrap();
        assert!(run.report.all_pass(), "{:?}", run.report.failures().collect::<Vec<_>>());
        // particles stand still up to the O(dt²) splitting error
        let b = run.table("trajectory_bundle").unwrap();
        for row in &b.rows[1..] {
            for (x, x0) in row[1..].iter().zip(&b.rows[0][1..]) {
                assert!((x - x0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn superposition_is_equivariant_on_a_short_run() {
        let spec = EquivarianceSpec { n_samples: 3000, duration: Some(PI / 2.0), checkpoints: 2, noise_trials: 200, ..Default::default() };
        let run = equivariance_check(&spec, 5).unwrap();
        assert!(run.report.all_pass(), "{:?}", run.report.failures().collect::<Vec<_>>());
        let rows = &run.table("l1_checkpoints").unwrap().rows;
        assert_eq!(rows.len(), 3);
        assert!((rows[2][0] - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_tables() {
        let spec = EquivarianceSpec { n_samples: 500, duration: Some(0.5), checkpoints: 2, noise_trials: 50, ..Default::default() };
        let a = equivariance_check(&spec, 9).unwrap();
        let b = equivariance_check(&spec, 9).unwrap();
        for (x, y) in a.tables.iter().zip(&b.tables) {
            assert_eq!(x.to_csv(), y.to_csv());
        }
    }
}
