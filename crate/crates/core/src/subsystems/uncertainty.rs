use serde::{Deserialize, Serialize};

use crate::bohm::states::{free_gaussian, free_gaussian_width, spreading_time};
use crate::bohm::{advance_ensemble, FrameVelocities, PsiHistory, QualityFlags, SplitStep, TrajectoryOptions, Units};
use crate::error::{config, Result};
use crate::numerics::{mean_and_sd, CellSampler, Grid, RngStream};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

/// Free Gaussian packets of decreasing width. Times and box sizes scale
/// with each `σ₀`, so every rung is the same problem in rescaled units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsoluteUncertaintySpec {
    pub sigma_ladder: Vec<f64>,
    pub units: Units,
    pub n_samples: usize,
    /// `t_final` in units of the spreading time `2mσ₀²/ħ`.
    pub spreading_times: f64,
    pub grid_points: usize,
    /// Box length in units of `σ₀`.
    pub box_widths: f64,
    pub frames_per_spreading_time: usize,
    pub trajectory_steps_per_spreading_time: usize,
    /// Below this `σ(t_final)/σ₀` the run is not asymptotic and is flagged.
    pub min_spread_ratio: f64,
    pub product_tolerance: f64,
    pub ratio_tolerance: f64,
    pub spread_tolerance: f64,
}

impl Default for AbsoluteUncertaintySpec {
    fn default() -> Self {
        AbsoluteUncertaintySpec {
            sigma_ladder: vec![1.0, 0.5, 0.25],
            units: Units::natural(),
            n_samples: 100_000,
            spreading_times: 20.0,
            grid_points: 2048,
            box_widths: 320.0,
            frames_per_spreading_time: 50,
            trajectory_steps_per_spreading_time: 20,
            min_spread_ratio: 5.0,
            product_tolerance: 0.02,
            ratio_tolerance: 0.05,
            spread_tolerance: 0.01,
        }
    }
}

impl AbsoluteUncertaintySpec {
    fn validate(&self) -> Result<()> {
        if self.sigma_ladder.is_empty() || self.sigma_ladder.iter().any(|s| !(*s > 0.0)) {
            return config("σ₀ ladder must be non-empty and positive");
        }
        if self.n_samples < 2 || !(self.spreading_times > 0.0) || !(self.box_widths > 0.0) {
            return config("need at least two samples, a positive horizon and a positive box");
        }
        if self.frames_per_spreading_time == 0 || self.trajectory_steps_per_spreading_time == 0 {
            return config("frame and step densities must be positive");
        }
        self.units.validate(1)
    }
}

/// One rung of the ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Rung {
    pub sigma0: f64,
    pub t_final: f64,
    /// Standard deviation of `|φ|²` on the grid.
    pub dx0: f64,
    /// Spread of `(X(t_f) − X(t_m)) / (t_f − t_m)`.
    pub dv: f64,
    pub spread_final: f64,
    pub flags: QualityFlags,
}

pub(crate) fn run_rung(spec: &AbsoluteUncertaintySpec, sigma0: f64, stream: RngStream) -> Result<Rung> {
    let (m, hbar) = (spec.units.mass(0), spec.units.hbar);
    let tau = spreading_time(sigma0, m, hbar);
    let t_final = spec.spreading_times * tau;
    let grid = Grid::one_d(spec.grid_points, spec.box_widths * sigma0)?;
    let wf = free_gaussian(&grid, &spec.units, 0.0, sigma0)?;
    let frames = (spec.spreading_times * spec.frames_per_spreading_time as f64).ceil() as usize;
    // one split step per frame: free drift is exact in k-space
    let prop = SplitStep::new(&wf, t_final / frames as f64)?;
    let history = PsiHistory::record(&wf, &prop, 1, frames + 1)?;
    let velocities = FrameVelocities::from_history(&history)?;

    let starts = CellSampler::new(&grid, &wf.density())?.sample(spec.n_samples, stream);
    let t_mid = 0.5 * t_final;
    let opts = TrajectoryOptions::with_dt(tau / spec.trajectory_steps_per_spreading_time as f64);
    let paths = advance_ensemble(&velocities, &starts, 0.0, &[t_mid, t_final], &opts)?;
    let mut flags = QualityFlags::default();
    for p in &paths {
        flags.merge(&p.flags);
    }
    let speeds: Vec<f64> = paths.iter().map(|p| (p.points[1][0] - p.points[0][0]) / (t_final - t_mid)).collect();
    let finals: Vec<f64> = paths.iter().map(|p| p.points[1][0]).collect();
    let (_, dx0) = wf.position_moments(0);
    Ok(Rung { sigma0, t_final, dx0, dv: mean_and_sd(&speeds).1, spread_final: mean_and_sd(&finals).1, flags })
}

/// Position spread times asymptotic velocity spread for a ladder of packet
/// widths: `Δx₀·m·Δv` should sit at `ħ/2` and `Δv` should scale as `1/σ₀`.
pub fn absolute_uncertainty_experiment(spec: &AbsoluteUncertaintySpec, seed: u64) -> Result<ExperimentRun> {
    spec.validate()?;
    let (m, hbar) = (spec.units.mass(0), spec.units.hbar);
    let root = RngStream::new(seed, 0);
    let rungs = spec
        .sigma_ladder
        .iter()
        .enumerate()
        .map(|(k, &s)| run_rung(spec, s, root.child(k as u64)))
        .collect::<Result<Vec<_>>>()?;

    let mut report =
        ExperimentReport::new("absolute-uncertainty", seed, serde_json::to_value(spec).expect("spec serializes"));
    let mut table = DataTable::new(
        "uncertainty_ladder",
        "absolute uncertainty: dx0 * m * dv against hbar/2 over the sigma0 ladder",
        &["sigma0", "t_final", "dx0", "dv", "product_over_half_hbar", "dv_oracle", "spread_final", "sigma_final"],
    );
    let (mut measured, mut oracle) = (Vec::new(), Vec::new());
    let mut flags = QualityFlags::default();
    for r in &rungs {
        let product = r.dx0 * m * r.dv / (0.5 * hbar);
        let sigma_final = free_gaussian_width(r.sigma0, r.t_final, m, hbar);
        let dv_oracle = hbar / (2.0 * m * r.sigma0);
        report.push(Metric::near(format!("uncertainty_product[sigma0={}]", r.sigma0), product, 1.0, spec.product_tolerance));
        report.push(Metric::near(
            format!("final_spread_ratio[sigma0={}]", r.sigma0),
            r.spread_final / sigma_final,
            1.0,
            spec.spread_tolerance,
        ));
        report.push(Metric::info(format!("velocity_spread[sigma0={}]", r.sigma0), r.dv));
        if sigma_final / r.sigma0 < spec.min_spread_ratio {
            report.flags.push(format!(
                "sigma0 = {}: t_final too short for the asymptotic regime (sigma(t_final)/sigma0 = {:.3} < {})",
                r.sigma0,
                sigma_final / r.sigma0,
                spec.min_spread_ratio
            ));
        }
        table.push(vec![r.sigma0, r.t_final, r.dx0, r.dv, product, dv_oracle, r.spread_final, sigma_final]);
        measured.push((1.0 / r.sigma0, r.dv));
        oracle.push((1.0 / r.sigma0, dv_oracle));
        flags.merge(&r.flags);
    }
    for w in rungs.windows(2) {
        report.push(Metric::near(
            format!("velocity_spread_ratio[sigma0={}/{}]", w[1].sigma0, w[0].sigma0),
            w[1].dv / w[0].dv,
            w[0].sigma0 / w[1].sigma0,
            spec.ratio_tolerance,
        ));
    }
    report.push(Metric::info("node_clamps", flags.clamps as f64));
    if flags.wraps > 0 {
        report.flags.push(format!("{} trajectory wraps across the periodic box", flags.wraps));
    }
    report.notes.push(format!(
        "asymptotic velocity estimated as (X(t_f) - X(t_f/2)) / (t_f/2) with t_f = {} spreading times",
        spec.spreading_times
    ));

    let mut run = ExperimentRun::new(report);
    run.add_table(table);
    run.plots.push(
        Plot::new("velocity_spread", "Velocity spread vs 1/sigma0", "1/sigma0", "dv")
            .with(Series::new("measured", SeriesStyle::Points, measured))
            .with(Series::new("hbar/(2 m sigma0)", SeriesStyle::Line, oracle)),
    );
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AbsoluteUncertaintySpec {
        AbsoluteUncertaintySpec { n_samples: 20_000, grid_points: 1024, ..Default::default() }
    }

    #[test]
    fn single_rung_follows_the_spreading_law() {
        let spec = small();
        let r = run_rung(&spec, 0.5, RngStream::new(5, 0)).unwrap();
        // closed-form trajectory X(t) = X₀ σ(t)/σ₀ fixes Δv exactly up to
        // sampling noise in Δx₀
        let tau = spreading_time(0.5, 1.0, 1.0);
        let slope = (free_gaussian_width(0.5, 20.0 * tau, 1.0, 1.0) - free_gaussian_width(0.5, 10.0 * tau, 1.0, 1.0))
            / (10.0 * tau * 0.5);
        assert!((r.dx0 - 0.5).abs() < 1e-6, "{}", r.dx0);
        assert!((r.dv / (slope * 0.5) - 1.0).abs() < 0.03, "{} vs {}", r.dv, slope * 0.5);
        assert_eq!(r.flags.wraps, 0);
        assert_eq!(r.flags.clamps, 0);
    }

    #[test]
    fn short_horizon_is_flagged() {
        let spec = AbsoluteUncertaintySpec { sigma_ladder: vec![1.0], spreading_times: 2.0, ..small() };
        let run = absolute_uncertainty_experiment(&spec, 1).unwrap();
        assert!(run.report.flags.iter().any(|f| f.contains("asymptotic")));
    }

    #[test]
    fn rejects_bad_ladder() {
        let spec = AbsoluteUncertaintySpec { sigma_ladder: vec![1.0, -0.5], ..small() };
        assert!(absolute_uncertainty_experiment(&spec, 0).is_err());
    }
}
