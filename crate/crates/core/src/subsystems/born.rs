use serde::{Deserialize, Serialize};

use super::conditional::conditional_wavefunction;
use super::joint::JointState;
use crate::bohm::{Units, WaveFunction};
use crate::error::{config, Result};
use crate::numerics::{
    l1_distance, l1_noise_quantile, AxisBinning, BinnedMass, Binning, CellSampler, EmpiricalDistribution, Grid,
    RngStream,
};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionalBornSpec {
    pub grid_points: usize,
    pub length: f64,
    pub units: Units,
    pub state: JointState,
    /// Product-state run checked against the sampling-noise floor.
    pub control: Option<JointState>,
    pub n_samples: usize,
    pub y_bins: usize,
    pub x_bins: usize,
    /// X histograms cover `[-x_range, x_range]`, plus an overflow bin.
    pub x_range: f64,
    pub min_count: u64,
    pub l1_limit: f64,
    pub noise_quantile: f64,
    pub noise_trials: usize,
}

impl Default for ConditionalBornSpec {
    fn default() -> Self {
        ConditionalBornSpec {
            grid_points: 256,
            length: 16.0,
            units: Units::natural(),
            state: JointState::CorrelatedGaussian { s: 0.5, big_s: 2.0 },
            control: Some(JointState::Product { sigma_x: 1.0, sigma_y: 1.5, x_centre: 0.0, momentum_x: 0.0 }),
            n_samples: 100_000,
            y_bins: 16,
            x_bins: 32,
            x_range: 6.0,
            min_count: 100,
            l1_limit: 0.1,
            noise_quantile: 0.999,
            noise_trials: 1000,
        }
    }
}

impl ConditionalBornSpec {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.y_bins == 0 || self.x_bins == 0 || self.noise_trials == 0 {
            return config("samples, bins and noise trials must be positive");
        }
        if self.y_bins > self.grid_points {
            return config("more y-bins than grid rows");
        }
        if !(self.x_range > 0.0 && self.x_range < 0.5 * self.length) {
            return config("x histogram range must lie inside the box");
        }
        Ok(())
    }
}

/// Result for one environment bin.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BinStatistics {
    pub rows: (usize, usize),
    pub count: u64,
    pub l1: f64,
    pub noise: f64,
    pub empirical: BinnedMass,
    pub target: BinnedMass,
}

/// Contiguous row ranges carrying about equal `|Ψ|²` mass each.
fn equal_mass_rows(wf: &WaveFunction, bins: usize) -> Vec<(usize, usize)> {
    let g = wf.grid();
    let n = g.points();
    let rho = wf.density();
    let row_mass: Vec<f64> = rho.chunks_exact(n).map(|r| r.iter().sum()).collect();
    let total: f64 = row_mass.iter().sum();
    let mut ranges = Vec::with_capacity(bins);
    let (mut start, mut acc) = (0, 0.0);
    for (r, m) in row_mass.iter().enumerate() {
        acc += m;
        let filled = ranges.len() + 1;
        let rows_left = n - r - 1;
        let bins_left = bins - filled;
        if filled < bins && (acc >= total * filled as f64 / bins as f64 || rows_left == bins_left) {
            ranges.push((start, r + 1));
            start = r + 1;
        }
    }
    ranges.push((start, n));
    ranges
}

/// Samples `(X, Y) ~ |Ψ|²`, groups them by the row range containing `Y`, and
/// compares each group's X histogram with the slice-weighted average of
/// `|ψ^y|²` over the rows in the range.
pub(crate) fn per_bin_statistics(
    wf: &WaveFunction,
    spec: &ConditionalBornSpec,
    stream: RngStream,
) -> Result<(Vec<BinStatistics>, Vec<(usize, usize, u64)>)> {
    let g = *wf.grid();
    let n = g.points();
    let line = Grid::one_d(n, g.length())?;
    let binning = Binning::one_d(AxisBinning::cell_aligned(&line, -spec.x_range, spec.x_range, spec.x_bins)?);
    let ranges = equal_mass_rows(wf, spec.y_bins);
    let mut bin_of_row = vec![0; n];
    for (b, &(lo, hi)) in ranges.iter().enumerate() {
        bin_of_row[lo..hi].iter_mut().for_each(|x| *x = b);
    }
    let samples = CellSampler::new(&g, &wf.density())?.sample(spec.n_samples, stream.child(0));
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); ranges.len()];
    for q in &samples {
        groups[bin_of_row[g.cell_of(q[1])]].push(q[0]);
    }

    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (b, &(lo, hi)) in ranges.iter().enumerate() {
        let count = groups[b].len() as u64;
        if count < spec.min_count {
            excluded.push((lo, hi, count));
            continue;
        }
        let mut target = vec![0.0; n];
        for iy in lo..hi {
            // rows with no amplitude at all contribute nothing
            if let Ok(c) = conditional_wavefunction(wf, g.coord(iy)) {
                for (t, d) in target.iter_mut().zip(c.density()) {
                    *t += d * c.slice_norm();
                }
            }
        }
        let target = BinnedMass::from_grid_density(binning.clone(), &line, &target)?;
        let empirical = EmpiricalDistribution::from_values(binning.clone(), groups[b].iter().copied()).masses()?;
        let l1 = l1_distance(&empirical, &target)?;
        let noise = l1_noise_quantile(&target, count, spec.noise_quantile, spec.noise_trials, stream.child(1 + b as u64))?;
        kept.push(BinStatistics { rows: (lo, hi), count, l1, noise, empirical, target });
    }
    Ok((kept, excluded))
}

/// Empirical conditional distribution of the subsystem coordinate given
/// the environment coordinate, against `|ψ^Y|²`.
pub fn conditional_born_statistics(spec: &ConditionalBornSpec, seed: u64) -> Result<ExperimentRun> {
    spec.validate()?;
    let grid = Grid::two_d(spec.grid_points, spec.length)?;
    let root = RngStream::new(seed, 0);
    let mut report =
        ExperimentReport::new("conditional-born", seed, serde_json::to_value(spec).expect("spec serializes"));
    let mut table = DataTable::new(
        "per_bin_l1",
        "conditional measure P(X in dx | Y) = |psi^Y(x)|^2 dx: per-y-bin L1 (run 0 state, run 1 product control)",
        &["run", "bin", "y_lo", "y_hi", "count", "l1", "noise_quantile"],
    );
    let dy = grid.dx();
    let mut plot = Plot::new("per_bin_l1", "Per-bin L1 distance", "y", "L1");
    let mut example = None;
    let runs: Vec<(&str, &JointState)> =
        std::iter::once(("state", &spec.state)).chain(spec.control.as_ref().map(|c| ("control", c))).collect();
    for (run_idx, (label, state)) in runs.iter().enumerate() {
        let wf = state.build(&grid, &spec.units)?;
        let (bins, excluded) = per_bin_statistics(&wf, spec, root.child(run_idx as u64))?;
        for (lo, hi, count) in &excluded {
            report.flags.push(format!(
                "{label}: y-bin [{:.4}, {:.4}) excluded with {count} samples (< {})",
                grid.coord(*lo) - 0.5 * dy,
                grid.coord(*hi - 1) + 0.5 * dy,
                spec.min_count
            ));
        }
        let mut pts = Vec::new();
        for (b, s) in bins.iter().enumerate() {
            let (y_lo, y_hi) = (grid.coord(s.rows.0) - 0.5 * dy, grid.coord(s.rows.1 - 1) + 0.5 * dy);
            table.push(vec![run_idx as f64, b as f64, y_lo, y_hi, s.count as f64, s.l1, s.noise]);
            pts.push((0.5 * (y_lo + y_hi), s.l1));
        }
        let max_l1 = bins.iter().map(|s| s.l1).fold(0.0, f64::max);
        if run_idx == 0 {
            report.push(Metric::below("max_bin_l1", max_l1, spec.l1_limit));
            example = bins.get(bins.len() / 2).cloned();
        } else {
            report.push(Metric::info("control_max_bin_l1", max_l1));
            report.push(Metric::flag("control_bins_within_noise", bins.iter().all(|s| s.l1 <= s.noise)));
        }
        report.push(Metric::info(format!("{label}_bins_used"), bins.len() as f64));
        plot = plot.with(Series::new(label, SeriesStyle::Points, pts));
    }
    let mut run = ExperimentRun::new(report);
    run.plots.push(plot);
    if let Some(s) = example {
        let edges = s.target.binning().axes()[0].edges().to_vec();
        let dens = |m: &BinnedMass| -> Vec<(f64, f64)> {
            (0..edges.len() - 1)
                .map(|b| (0.5 * (edges[b] + edges[b + 1]), m.masses()[b] / (edges[b + 1] - edges[b])))
                .collect()
        };
        run.plots.push(
            Plot::new("middle_bin_histogram", "X given Y in the middle bin", "x", "density")
                .with(Series::new("samples", SeriesStyle::Steps, dens(&s.empirical)))
                .with(Series::new("|psi^Y|^2", SeriesStyle::Line, dens(&s.target))),
        );
    }
    run.add_table(table);
    Ok(run)
}
