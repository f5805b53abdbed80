use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::bohm::states::gaussian_packet;
use crate::classical_experiments::{deviates, ladder_decreases};
use crate::error::{config, Result};
use crate::numerics::{
    mean_and_sd, AxisBinning, BinnedMass, Binning, CellSampler, Grid, MeasureEstimate, RngStream, DEFAULT_TAU, Z_99,
};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

/// `M` subsystems, each prepared with the Gaussian effective wave function
/// `φ`, so the universal `|Ψ|²` is the product of `M` copies of `|φ|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BornLlnSpec {
    pub grid_points: usize,
    pub length: f64,
    pub sigma: f64,
    pub centre: f64,
    /// Region `A = [a, b)`.
    pub region: [f64; 2],
    pub ladder: Vec<usize>,
    pub epsilon: f64,
    pub seeds: usize,
    pub tau: f64,
}

impl Default for BornLlnSpec {
    fn default() -> Self {
        BornLlnSpec {
            grid_points: 1024,
            length: 20.0,
            sigma: 1.0,
            centre: 0.0,
            region: [0.0, 10.0],
            ladder: vec![100, 1_000, 10_000],
            epsilon: 0.02,
            seeds: 1000,
            tau: DEFAULT_TAU,
        }
    }
}

impl BornLlnSpec {
    fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder[0] == 0 || self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return config("ensemble ladder must be non-empty, positive and increasing");
        }
        if !(self.epsilon > 0.0) || self.seeds == 0 || !(self.sigma > 0.0) {
            return config("need ε > 0, σ > 0 and at least one seed");
        }
        if !(self.region[0] < self.region[1]) {
            return config("region A must have a < b");
        }
        Ok(())
    }
}

/// `ℙ(|K/M − p| > ε)` for `K ~ Binomial(M, p)`, summed exactly.
pub fn born_tail_probability(m: usize, p: f64, epsilon: f64) -> f64 {
    let dist = Binomial::new(p.clamp(0.0, 1.0), m as u64).expect("valid binomial");
    (0..=m as u64).filter(|&k| deviates(k as f64 / m as f64, p, epsilon)).map(|k| dist.pmf(k)).sum()
}

/// Frequency `(1/M) Σ χ_A(X_i)` for one draw of the universal configuration.
fn region_frequency(sampler: &CellSampler, region: [f64; 2], m: usize, stream: RngStream) -> f64 {
    let mut rng = stream.rng();
    let hits = (0..m)
        .filter(|_| {
            let x = sampler.draw(&mut rng)[0];
            region[0] <= x && x < region[1]
        })
        .count();
    hits as f64 / m as f64
}

/// Measure of `{|frequency − ∫_A|φ|²| > ε}` along the ensemble ladder,
/// checked against the exact binomial tail.
pub fn born_lln_experiment(spec: &BornLlnSpec, seed: u64) -> Result<ExperimentRun> {
    spec.validate()?;
    let grid = Grid::one_d(spec.grid_points, spec.length)?;
    let density: Vec<f64> =
        grid.coords().iter().map(|&x| gaussian_packet(x, spec.centre, spec.sigma, 0.0).norm_sqr()).collect();
    let sampler = CellSampler::new(&grid, &density)?;
    // same piecewise-constant law the sampler draws from
    let region_mass = BinnedMass::from_grid_density(
        Binning::one_d(AxisBinning::new(vec![spec.region[0], spec.region[1]])?),
        &grid,
        &density,
    )?;
    let p_a = region_mass.masses()[0];

    let root = RngStream::new(seed, 0);
    let jobs: Vec<(usize, usize)> = (0..spec.ladder.len()).flat_map(|r| (0..spec.seeds).map(move |s| (r, s))).collect();
    let freqs: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, s)| region_frequency(&sampler, spec.region, spec.ladder[r], root.child(r as u64).child(s as u64)))
        .collect();

    let mut report = ExperimentReport::new("born-lln", seed, serde_json::to_value(spec).expect("spec serializes"));
    report.push(Metric::info("region_probability", p_a));
    report.notes.push(
        "universal configuration drawn as M independent |phi|^2 samples: exact for the product state phi^M".into(),
    );
    let mut table = DataTable::new(
        "deviation_ladder",
        "Born LLN: measure of {|frequency - int_A |phi|^2| > eps} vs exact binomial tail",
        &["M", "estimate", "ci_lo", "ci_hi", "binomial_tail", "mean_frequency", "sd_frequency"],
    );
    let mut estimates = Vec::new();
    let (mut est_pts, mut oracle_pts) = (Vec::new(), Vec::new());
    let mut last = None;
    for (r, &m) in spec.ladder.iter().enumerate() {
        let f = &freqs[r * spec.seeds..(r + 1) * spec.seeds];
        let hits = f.iter().filter(|&&x| deviates(x, p_a, spec.epsilon)).count() as u64;
        let est = MeasureEstimate::from_hits(hits, spec.seeds as u64);
        let oracle = born_tail_probability(m, p_a, spec.epsilon);
        let (mean, sd) = mean_and_sd(f);
        let half = Z_99 * sd / (spec.seeds as f64).sqrt();
        report.push(Metric::contains(format!("deviation_measure[M={m}]"), est.estimate, [est.lo, est.hi], oracle));
        report.push(Metric::contains(format!("mean_frequency[M={m}]"), mean, [mean - half, mean + half], p_a));
        table.push(vec![m as f64, est.estimate, est.lo, est.hi, oracle, mean, sd]);
        est_pts.push((m as f64, est.estimate));
        oracle_pts.push((m as f64, oracle));
        estimates.push(est.estimate);
        last = Some((m, est));
    }
    report.push(Metric::flag("deviation_measure_decreasing", ladder_decreases(&estimates)));
    if let Some((m, est)) = last {
        let verdict = est.verdict(spec.tau);
        report.push(Metric::flag(
            format!("deviation_set_atypical[M={m}]"),
            verdict.classification == crate::numerics::Classification::Atypical,
        ));
        report.notes.push(format!("deviation set at M = {m}: {}", verdict.classification));
    }
    let mut run = ExperimentRun::new(report);
    run.add_table(table);
    run.plots.push(
        Plot::new("deviation_ladder", "Deviation-set measure vs M", "M", "measure")
            .log_x()
            .with(Series::new("estimate", SeriesStyle::Points, est_pts))
            .with(Series::new("binomial tail", SeriesStyle::Line, oracle_pts)),
    );
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent tail: log-space binomial terms built from ln Γ by
    /// summation, no statrs.
    fn tail_oracle(m: usize, p: f64, eps: f64) -> f64 {
        let ln_fact: Vec<f64> = std::iter::once(0.0)
            .chain((1..=m).scan(0.0, |acc, k| {
                *acc += (k as f64).ln();
                Some(*acc)
            }))
            .collect();
        (0..=m)
            .filter(|&k| (k as f64 / m as f64 - p).abs() > eps * (1.0 + 1e-12))
            .map(|k| {
                (ln_fact[m] - ln_fact[k] - ln_fact[m - k] + k as f64 * p.ln() + (m - k) as f64 * (1.0 - p).ln())
                    .exp()
            })
            .sum()
    }

    #[test]
    fn exact_tail_matches_independent_sum() {
        for &(m, p, eps) in &[(100, 0.5, 0.02), (1000, 0.5, 0.02), (37, 0.3, 0.1), (10_000, 0.5, 0.02)] {
            let a = born_tail_probability(m, p, eps);
            let b = tail_oracle(m, p, eps);
            assert!((a - b).abs() < 1e-10, "{m}: {a} vs {b}");
        }
        // frozen from tail_oracle
        assert!((born_tail_probability(100, 0.5, 0.02) - 0.617_299_413_589_243_8).abs() < 1e-12);
    }

    #[test]
    fn single_subsystem_is_a_bernoulli_tail() {
        // A = [1, 10): p ≈ 0.16, ε = 0.5 → only frequency 1 deviates, tail = p
        let spec = BornLlnSpec { region: [1.0, 10.0], ladder: vec![1], epsilon: 0.5, seeds: 4000, ..Default::default() };
        let run = born_lln_experiment(&spec, 3).unwrap();
        let p = run.report.metric("region_probability").unwrap().value;
        assert!((p - 0.158_655).abs() < 1e-3, "{p}");
        assert!((born_tail_probability(1, p, 0.5) - p).abs() < 1e-15);
        assert!(run.report.metric("deviation_measure[M=1]").unwrap().pass);
    }

    #[test]
    fn full_domain_never_deviates() {
        let spec = BornLlnSpec { region: [-20.0, 20.0], ladder: vec![1, 50], seeds: 50, ..Default::default() };
        let run = born_lln_experiment(&spec, 1).unwrap();
        assert_eq!(run.report.metric("region_probability").unwrap().value, 1.0);
        let t = run.table("deviation_ladder").unwrap();
        for row in &t.rows {
            assert_eq!(row[1], 0.0);
            assert_eq!(row[5], 1.0);
        }
    }

    #[test]
    fn default_ladder_passes() {
        let run = born_lln_experiment(&BornLlnSpec { seeds: 300, ..Default::default() }, 11).unwrap();
        for m in [100, 1000, 10_000] {
            assert!(run.report.metric(&format!("deviation_measure[M={m}]")).unwrap().pass);
        }
    }
}
