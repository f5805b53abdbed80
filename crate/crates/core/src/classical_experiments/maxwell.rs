use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use super::{deviates, ladder_decreases};
use crate::classical::{sample_microcanonical_ideal_gas, Microstate};
use crate::error::{config, Result};
use crate::numerics::{mean_and_sd, MeasureEstimate, RngStream, DEFAULT_TAU};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

/// Interval `[lo, hi]` for one velocity component. Bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityWindow {
    pub axis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl VelocityWindow {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let w = VelocityWindow { axis: 0, lo, hi };
        w.validate()?;
        Ok(w)
    }

    /// `[v0 − δ, v0 + δ]`
    pub fn centred(v0: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return config("window half-width must be positive");
        }
        Self::interval(v0 - delta, v0 + delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return config(format!("velocity window needs lo < hi, got [{}, {}]", self.lo, self.hi));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalSpec {
    pub kbt: f64,
    pub mass: f64,
}

impl Default for ThermalSpec {
    fn default() -> Self {
        ThermalSpec { kbt: 1.0, mass: 1.0 }
    }
}

impl ThermalSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.kbt > 0.0 && self.mass > 0.0) {
            return config("k_B T and mass must be positive");
        }
        Ok(())
    }

    /// Standard deviation of one velocity component, `sqrt(k_B T / m)`.
    pub fn velocity_scale(&self) -> f64 {
        (self.kbt / self.mass).sqrt()
    }
}

/// One-component Maxwell density `(m / 2π k_B T)^{1/2} exp(−m v² / 2 k_B T)`.
pub fn maxwell_density(v: f64, thermal: &ThermalSpec) -> f64 {
    let s = thermal.velocity_scale();
    (-0.5 * (v / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Maxwell mass of the window.
pub fn maxwell_target_fraction(window: &VelocityWindow, thermal: &ThermalSpec) -> f64 {
    let s = thermal.velocity_scale() * std::f64::consts::SQRT_2;
    let (a, b) = (window.lo / s, window.hi / s);
    // pick the form that avoids cancellation in the tails
    if a >= 0.0 {
        0.5 * (erfc(a) - erfc(b))
    } else if b <= 0.0 {
        0.5 * (erfc(-b) - erfc(-a))
    } else {
        0.5 * (erf(b) - erf(a))
    }
}

/// Fraction of particles whose velocity component lies in the window.
pub fn empirical_velocity_fraction(state: &Microstate, window: &VelocityWindow, mass: f64) -> f64 {
    let n = state.particles();
    if n == 0 {
        return 0.0;
    }
    let hits = (0..n)
        .filter(|&i| window.contains(state.momentum(i)[window.axis] / mass))
        .count();
    hits as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxwellLlnSpec {
    pub ladder: Vec<usize>,
    pub window: VelocityWindow,
    pub thermal: ThermalSpec,
    pub epsilon: f64,
    pub seeds: usize,
    pub tau: f64,
    pub box_extents: Vec<f64>,
    /// Upper bound on the deviation-set estimate at the top of the ladder.
    pub final_threshold: f64,
    pub histogram_bins: usize,
}

impl Default for MaxwellLlnSpec {
    fn default() -> Self {
        MaxwellLlnSpec {
            ladder: vec![100, 1_000, 10_000, 100_000],
            window: VelocityWindow { axis: 0, lo: -1.0, hi: 1.0 },
            thermal: ThermalSpec { kbt: 1.0, mass: 1.0 },
            epsilon: 0.02,
            seeds: 100,
            tau: DEFAULT_TAU,
            box_extents: vec![1.0, 1.0, 1.0],
            final_threshold: 0.01,
            histogram_bins: 60,
        }
    }
}

impl MaxwellLlnSpec {
    fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.thermal.validate()?;
        if self.window.axis >= self.box_extents.len() {
            return config("window axis exceeds the spatial dimension");
        }
        if self.ladder.is_empty() || self.ladder.windows(2).any(|w| w[0] >= w[1]) || self.ladder[0] == 0 {
            return config("N-ladder must be non-empty, positive and increasing");
        }
        if !(self.epsilon > 0.0) || self.seeds == 0 {
            return config("need ε > 0 and at least one seed");
        }
        Ok(())
    }
}

/// Measure of `{X : |F(X) − target| > ε}` under the microcanonical measure,
/// along an increasing particle-number ladder.
pub fn maxwell_lln_experiment(spec: &MaxwellLlnSpec, seed: u64) -> Result<ExperimentRun> {
    spec.validate()?;
    let target = maxwell_target_fraction(&spec.window, &spec.thermal);
    let d = spec.box_extents.len();
    let root = RngStream::new(seed, 0);
    let jobs: Vec<(usize, usize)> = (0..spec.ladder.len())
        .flat_map(|r| (0..spec.seeds).map(move |s| (r, s)))
        .collect();
    let fractions: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, s)| -> Result<f64> {
            let n = spec.ladder[r];
            let energy = 0.5 * d as f64 * n as f64 * spec.thermal.kbt;
            let stream = root.child(r as u64).child(s as u64);
            let state = sample_microcanonical_ideal_gas(n, &spec.box_extents, spec.thermal.mass, energy, stream)?;
            Ok(empirical_velocity_fraction(&state, &spec.window, spec.thermal.mass))
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new("maxwell-lln", seed, serde_json::to_value(spec).expect("spec serializes"));
    report.push(Metric::info("target_fraction", target));
    let mut table = DataTable::new(
        "deviation_ladder",
        "law of large numbers for the Maxwell distribution: lambda_E(|F - target| > eps) -> 0",
        &["n", "seeds", "hits", "estimate", "ci_lo", "ci_hi", "mean_fraction", "sd_fraction"],
    );
    let mut estimates = Vec::new();
    let mut ladder_plot = Plot::new("convergence_ladder", "Deviation-set measure vs N", "N", "measure").log_x();
    let (mut est_pts, mut hi_pts) = (Vec::new(), Vec::new());
    for (r, &n) in spec.ladder.iter().enumerate() {
        let f = &fractions[r * spec.seeds..(r + 1) * spec.seeds];
        let hits = f.iter().filter(|&&x| deviates(x, target, spec.epsilon)).count() as u64;
        let est = MeasureEstimate::from_hits(hits, spec.seeds as u64);
        let (mean, sd) = mean_and_sd(f);
        let verdict = est.verdict(spec.tau);
        report.push(Metric::info(format!("deviation_measure[N={n}]"), est.estimate).with_interval([est.lo, est.hi]));
        report.notes.push(format!("N = {n}: deviation set is {}", verdict.classification));
        table.push(vec![n as f64, spec.seeds as f64, hits as f64, est.estimate, est.lo, est.hi, mean, sd]);
        estimates.push(est.estimate);
        est_pts.push((n as f64, est.estimate));
        hi_pts.push((n as f64, est.hi));
    }
    report.push(Metric::flag("deviation_measure_decreasing", ladder_decreases(&estimates)));
    report.push(Metric::below(
        "final_deviation_measure",
        *estimates.last().expect("non-empty ladder"),
        spec.final_threshold,
    ));
    ladder_plot.series.push(Series::new("estimate", SeriesStyle::Line, est_pts));
    ladder_plot.series.push(Series::new("99% upper bound", SeriesStyle::Line, hi_pts));

    let mut run = ExperimentRun::new(report);
    run.add_table(table);
    let (hist, plot) = velocity_histogram(spec, root.child(u64::MAX))?;
    run.add_table(hist);
    run.plots.push(plot);
    run.plots.push(ladder_plot);
    Ok(run)
}

fn velocity_histogram(spec: &MaxwellLlnSpec, stream: RngStream) -> Result<(DataTable, Plot)> {
    let n = *spec.ladder.last().expect("non-empty ladder");
    let d = spec.box_extents.len();
    let energy = 0.5 * d as f64 * n as f64 * spec.thermal.kbt;
    let state = sample_microcanonical_ideal_gas(n, &spec.box_extents, spec.thermal.mass, energy, stream)?;
    let s = spec.thermal.velocity_scale();
    let (lo, hi) = (-4.0 * s, 4.0 * s);
    let bins = spec.histogram_bins.max(1);
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for i in 0..n {
        let v = state.momentum(i)[spec.window.axis] / spec.thermal.mass;
        let b = ((v - lo) / w).floor();
        if b >= 0.0 && (b as usize) < bins {
            counts[b as usize] += 1;
        }
    }
    let mut table = DataTable::new(
        "velocity_histogram",
        "empirical velocity density of one microstate vs the Maxwell density",
        &["v", "empirical_density", "maxwell_density"],
    );
    let mut emp = Vec::new();
    let mut theory = Vec::new();
    for (b, &c) in counts.iter().enumerate() {
        let v = lo + (b as f64 + 0.5) * w;
        let dens = c as f64 / (n as f64 * w);
        let m = maxwell_density(v, &spec.thermal);
        table.push(vec![v, dens, m]);
        emp.push((v, dens));
        theory.push((v, m));
    }
    let plot = Plot::new("velocity_histogram", &format!("v_x histogram, N = {n}"), "v_x", "density")
        .with(Series::new("empirical", SeriesStyle::Steps, emp))
        .with(Series::new("Maxwell", SeriesStyle::Line, theory));
    Ok((table, plot))
}
