use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{deviates, ladder_decreases, SURROGATE_NOTE};
use crate::error::{config, Result};
use crate::numerics::{mean_and_sd, MeasureEstimate, RngStream, DEFAULT_TAU};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

/// Rigid coin launched vertically with speed `u` and spin `ω`.
///
/// The coin lands after `T = 2u/g` having turned through `θ = ωT + θ₀`;
/// it shows heads iff `cos θ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoinMachineSpec {
    pub g: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub theta0: f64,
}

impl Default for CoinMachineSpec {
    fn default() -> Self {
        CoinMachineSpec { g: 9.8, u_min: 4.0, u_max: 6.0, omega_min: 50.0, omega_max: 100.0, theta0: 0.0 }
    }
}

impl CoinMachineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return config("gravity must be positive");
        }
        if !(self.u_min > 0.0 && self.u_min <= self.u_max) {
            return config("launch speed range must satisfy 0 < u_min ≤ u_max");
        }
        if !(self.omega_min >= 0.0 && self.omega_min <= self.omega_max) {
            return config("spin range must satisfy 0 ≤ ω_min ≤ ω_max");
        }
        Ok(())
    }

    /// Full turns spanned by the landing angle over the parameter rectangle.
    pub fn rotation_turns(&self) -> f64 {
        let theta = |u: f64, w: f64| 2.0 * u * w / self.g;
        (theta(self.u_max, self.omega_max) - theta(self.u_min, self.omega_min)) / (2.0 * PI)
    }

    /// Uniform draw of `(u, ω)` over the rectangle.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u = self.u_min + (self.u_max - self.u_min) * rng.random::<f64>();
        let w = self.omega_min + (self.omega_max - self.omega_min) * rng.random::<f64>();
        (u, w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoinFace {
    Heads,
    Tails,
}

pub fn coin_outcome(spec: &CoinMachineSpec, u: f64, omega: f64) -> CoinFace {
    let flight = 2.0 * u / spec.g;
    let theta = omega * flight + spec.theta0;
    if theta.cos() >= 0.0 {
        CoinFace::Heads
    } else {
        CoinFace::Tails
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoinLlnSpec {
    pub machine: CoinMachineSpec,
    pub ladder: Vec<usize>,
    pub epsilon: f64,
    pub seeds: usize,
    pub tau: f64,
    /// Below this many turns the ½ limit is not expected.
    pub min_turns: f64,
}

impl Default for CoinLlnSpec {
    fn default() -> Self {
        CoinLlnSpec {
            machine: CoinMachineSpec::default(),
            ladder: vec![100, 1_000, 10_000, 100_000],
            epsilon: 0.01,
            seeds: 100,
            tau: DEFAULT_TAU,
            min_turns: 10.0,
        }
    }
}

/// Relative frequency of heads in `n` tosses from one random stream.
fn heads_frequency(machine: &CoinMachineSpec, n: usize, stream: RngStream) -> f64 {
    let mut rng = stream.rng();
    let heads = (0..n)
        .filter(|_| {
            let (u, w) = machine.draw(&mut rng);
            coin_outcome(machine, u, w) == CoinFace::Heads
        })
        .count();
    heads as f64 / n as f64
}

/// Measure of `{|Σ F_i / N − ½| > ε}` over uniformly drawn initial
/// conditions, along an increasing ladder of toss counts.
pub fn coin_lln_experiment(spec: &CoinLlnSpec, seed: u64) -> Result<ExperimentRun> {
    spec.machine.validate()?;
    if spec.ladder.is_empty() || spec.ladder.windows(2).any(|w| w[0] >= w[1]) || spec.ladder[0] == 0 {
        return config("toss ladder must be non-empty, positive and increasing");
    }
    if !(spec.epsilon > 0.0) || spec.seeds == 0 {
        return config("need ε > 0 and at least one seed");
    }
    let turns = spec.machine.rotation_turns();
    let half_limit_expected = turns >= spec.min_turns;
    let root = RngStream::new(seed, 0);
    let jobs: Vec<(usize, usize)> = (0..spec.ladder.len())
        .flat_map(|r| (0..spec.seeds).map(move |s| (r, s)))
        .collect();
    let freqs: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, s)| heads_frequency(&spec.machine, spec.ladder[r], root.child(r as u64).child(s as u64)))
        .collect();

    let mut report = ExperimentReport::new("coin-lln", seed, serde_json::to_value(spec).expect("spec serializes"));
    report.notes.push(SURROGATE_NOTE.to_string());
    report.push(Metric::info("rotation_turns", turns));
    if !half_limit_expected {
        report.flags.push(format!(
            "spin range spans {turns:.3} turns (< {}); the 1/2 limit is not expected",
            spec.min_turns
        ));
    }
    let mut table = DataTable::new(
        "deviation_ladder",
        "coin-toss law of large numbers: lambda(|sum F_i / N - 1/2| > eps) -> 0",
        &["n", "seeds", "hits", "estimate", "ci_lo", "ci_hi", "mean_frequency", "sd_frequency", "max_abs_deviation"],
    );
    let mut estimates = Vec::new();
    let mut pts = Vec::new();
    for (r, &n) in spec.ladder.iter().enumerate() {
        let f = &freqs[r * spec.seeds..(r + 1) * spec.seeds];
        let hits = f.iter().filter(|&&x| deviates(x, 0.5, spec.epsilon)).count() as u64;
        let est = MeasureEstimate::from_hits(hits, spec.seeds as u64);
        let (mean, sd) = mean_and_sd(f);
        let max_dev = f.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max);
        report.push(Metric::info(format!("deviation_measure[N={n}]"), est.estimate).with_interval([est.lo, est.hi]));
        report.notes.push(format!("N = {n}: deviation set is {}", est.verdict(spec.tau).classification));
        table.push(vec![n as f64, spec.seeds as f64, hits as f64, est.estimate, est.lo, est.hi, mean, sd, max_dev]);
        estimates.push(est.estimate);
        pts.push((n as f64, mean));
    }
    let last = spec.ladder.len() - 1;
    let top = &freqs[last * spec.seeds..];
    let (mean_top, _) = mean_and_sd(top);
    let max_dev_top = top.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max);
    if half_limit_expected {
        report.push(Metric::flag("deviation_measure_decreasing", ladder_decreases(&estimates)));
        report.push(Metric::below("max_abs_frequency_deviation", max_dev_top, spec.epsilon));
    } else {
        report.push(Metric::info("max_abs_frequency_deviation", max_dev_top));
        report.notes.push(format!(
            "special initial conditions: limiting heads frequency {mean_top:.4} is not 1/2"
        ));
    }
    report.push(Metric::info("mean_frequency", mean_top));

    let mut run = ExperimentRun::new(report);
    run.add_table(table);
    run.plots.push(
        Plot::new("convergence_ladder", "Mean heads frequency vs N", "N", "frequency")
            .log_x()
            .with(Series::new("mean frequency", SeriesStyle::Line, pts))
            .with(Series::new(
                "1/2",
                SeriesStyle::Line,
                vec![(spec.ladder[0] as f64, 0.5), (spec.ladder[last] as f64, 0.5)],
            )),
    );
    Ok(run)
}
