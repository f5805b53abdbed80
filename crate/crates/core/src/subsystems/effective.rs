use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::conditional::{conditional_wavefunction, slice_at, SLICE_THRESHOLD};
use super::joint::JointState;
use crate::bohm::{bohmian_velocity, Units, WaveFunction};
use crate::error::{config, Result};
use crate::numerics::{ComplexField, Grid};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectiveOptions {
    /// Neighbourhood half-width in grid rows.
    pub radius_cells: usize,
    pub tol_eff: f64,
    pub tol_res: f64,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        EffectiveOptions { radius_cells: 5, tol_eff: 1e-3, tol_res: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectiveStatus {
    Detected,
    NotDetected,
    /// Every neighbouring slice was degenerate.
    Undecidable,
}

/// `Ψ ≈ φ(x)χ(y) + Ψ^⊥` around the environment coordinate `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveDecomposition {
    pub y: f64,
    pub status: EffectiveStatus,
    /// `min_y |⟨ψ^y, ψ^Y⟩|` over non-degenerate neighbour slices.
    pub overlap_score: f64,
    /// `‖Ψ^⊥‖² / ‖Ψ‖²` over the neighbourhood rows.
    pub residual_mass: f64,
    /// RMS of the non-separable part of the potential under `|φχ|²`.
    pub coupling: f64,
    /// Normalized `ψ^Y`.
    pub phi: Vec<Complex64>,
    /// `χ(y) = ⟨φ, Ψ(·, y)⟩` on every y-grid row.
    pub chi: Vec<Complex64>,
    pub neighbours: usize,
    pub degenerate_neighbours: usize,
}

impl EffectiveDecomposition {
    pub fn detected(&self) -> bool {
        self.status == EffectiveStatus::Detected
    }
}

/// Decides whether the subsystem has its own wave function near `Y`: the
/// normalized slices `ψ^y` for `|y − Y| ≤ r` must all agree with `ψ^Y`,
/// and the part of `Ψ` orthogonal to `φ = ψ^Y` must carry negligible mass
/// there.
pub fn detect_effective_wavefunction(
    wf: &WaveFunction,
    y: f64,
    opts: &EffectiveOptions,
) -> Result<EffectiveDecomposition> {
    if !(opts.tol_eff >= 0.0 && opts.tol_res >= 0.0) {
        return config("tolerances must be non-negative");
    }
    let centre = conditional_wavefunction(wf, y)?;
    let grid = *wf.grid();
    let n = grid.points();
    let dx = grid.dx();
    let phi = centre.normalized();
    let data = wf.data();

    let chi: Vec<Complex64> = (0..n)
        .map(|iy| {
            data[iy * n..(iy + 1) * n].iter().zip(&phi).map(|(z, p)| p.conj() * z).sum::<Complex64>() * dx
        })
        .collect();
    let max_row = (0..n)
        .map(|iy| data[iy * n..(iy + 1) * n].iter().map(|z| z.norm_sqr()).sum::<f64>() * dx)
        .fold(0.0, f64::max);

    let r = opts.radius_cells as f64 * grid.dx();
    let rows: Vec<usize> = (0..n)
        .filter(|&iy| {
            let d = grid.wrap(grid.coord(iy) - y).abs();
            d <= r * (1.0 + 1e-12)
        })
        .collect();

    let mut score = f64::INFINITY;
    let (mut neighbours, mut degenerate) = (0, 0);
    let (mut resid, mut total) = (0.0, 0.0);
    for &iy in &rows {
        let row = &data[iy * n..(iy + 1) * n];
        let norm: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        total += norm;
        resid += row
            .iter()
            .zip(&phi)
            .map(|(z, p)| (z - p * chi[iy]).norm_sqr())
            .sum::<f64>()
            * dx;
        match slice_at(wf, grid.coord(iy), SLICE_THRESHOLD * max_row) {
            Ok(s) => {
                neighbours += 1;
                let ov = (s.normalized().iter().zip(&phi).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx).norm();
                score = score.min(ov);
            }
            Err(_) => degenerate += 1,
        }
    }
    let residual_mass = if total > 0.0 { resid / total } else { 0.0 };
    let status = if neighbours == 0 {
        EffectiveStatus::Undecidable
    } else if score > 1.0 - opts.tol_eff && residual_mass < opts.tol_res {
        EffectiveStatus::Detected
    } else {
        EffectiveStatus::NotDetected
    };
    let coupling = separability_defect(wf, &phi, &chi, &rows);
    Ok(EffectiveDecomposition {
        y,
        status,
        overlap_score: if neighbours == 0 { f64::NAN } else { score.min(1.0) },
        residual_mass,
        coupling,
        phi,
        chi,
        neighbours,
        degenerate_neighbours: degenerate,
    })
}

/// Weighted RMS of `V − E[V|y] − E[V|x] + E[V]` under `|φ(x)χ(y)|²` on
/// the neighbourhood rows. Zero for any `V = f(x) + g(y)`.
fn separability_defect(wf: &WaveFunction, phi: &[Complex64], chi: &[Complex64], rows: &[usize]) -> f64 {
    let n = wf.grid().points();
    let v = wf.potential();
    let px: Vec<f64> = phi.iter().map(|z| z.norm_sqr()).collect();
    let sx: f64 = px.iter().sum();
    let py: Vec<f64> = rows.iter().map(|&iy| chi[iy].norm_sqr()).collect();
    let sy: f64 = py.iter().sum();
    if !(sx > 0.0 && sy > 0.0) {
        return 0.0;
    }
    let at = |k: usize, ix: usize| v[rows[k] * n + ix];
    let row_mean: Vec<f64> = (0..rows.len()).map(|k| (0..n).map(|ix| px[ix] * at(k, ix)).sum::<f64>() / sx).collect();
    let col_mean: Vec<f64> = (0..n).map(|ix| (0..rows.len()).map(|k| py[k] * at(k, ix)).sum::<f64>() / sy).collect();
    let mean: f64 = (0..rows.len()).map(|k| py[k] * row_mean[k]).sum::<f64>() / sy;
    let mut acc = 0.0;
    for k in 0..rows.len() {
        for ix in 0..n {
            let d = at(k, ix) - row_mean[k] - col_mean[ix] + mean;
            acc += px[ix] * py[k] * d * d;
        }
    }
    (acc / (sx * sy)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectiveDetectSpec {
    pub grid_points: usize,
    pub length: f64,
    pub units: Units,
    pub options: EffectiveOptions,
    pub product: JointState,
    pub two_branch: JointState,
    /// Environment coordinate inside branch 1.
    pub branch_y: f64,
    pub product_y: f64,
    /// `S` of the correlated Gaussian; the ladder sets `s = ratio · S`.
    pub correlated_big_s: f64,
    pub ratio_ladder: Vec<f64>,
    pub correlated_y: f64,
    pub score_threshold: f64,
    pub guiding_tolerance: f64,
}

impl Default for EffectiveDetectSpec {
    fn default() -> Self {
        EffectiveDetectSpec {
            grid_points: 256,
            length: 16.0,
            units: Units::natural(),
            options: EffectiveOptions::default(),
            product: JointState::Product { sigma_x: 0.8, sigma_y: 1.2, x_centre: 0.0, momentum_x: 1.0 },
            two_branch: JointState::TwoBranch {
                x_centres: [-2.0, 2.0],
                y_centres: [-3.5, 3.5],
                sigma_x: 0.7,
                sigma_y: 0.4,
                momenta_x: [1.0, -0.5],
            },
            branch_y: -3.5,
            product_y: 0.3,
            correlated_big_s: 2.0,
            ratio_ladder: vec![0.8, 0.4, 0.2],
            correlated_y: 0.3,
            score_threshold: 0.999,
            guiding_tolerance: 1e-8,
        }
    }
}

/// Largest `|v_x[φ](x) − v_x[Ψ](x, Y)|` along the grid row nearest `Y`,
/// over points valid in both fields.
fn guiding_mismatch(wf: &WaveFunction, y: f64, phi: &[Complex64]) -> Result<f64> {
    let g = *wf.grid();
    let iy = g.cell_of(y);
    let units = Units { masses: vec![wf.mass(0)], ..wf.units().clone() };
    let line = ComplexField::new(Grid::one_d(g.points(), g.length())?, phi.to_vec())?;
    let sub = bohmian_velocity(&WaveFunction::free(line, units)?)?;
    let full = bohmian_velocity(wf)?;
    Ok((0..g.points())
        .filter(|&ix| full.valid()[g.index(ix, iy)] && sub.valid()[ix])
        .map(|ix| (full.component(0)[g.index(ix, iy)] - sub.component(0)[ix]).abs())
        .fold(0.0, f64::max))
}

/// Detection on a product state, deep inside one branch of a two-branch
/// state, and along a ladder of increasingly correlated Gaussians.
pub fn effective_detection_experiment(spec: &EffectiveDetectSpec, seed: u64) -> Result<ExperimentRun> {
    if spec.ratio_ladder.is_empty() || spec.ratio_ladder.iter().any(|r| !(*r > 0.0)) {
        return config("ratio ladder needs positive entries");
    }
    let grid = Grid::two_d(spec.grid_points, spec.length)?;
    let mut report = ExperimentReport::new("effective-detect", seed, serde_json::to_value(spec).expect("spec serializes"));
    let mut table = DataTable::new(
        "detection_scores",
        "effective wave function: neighbourhood overlap score and residual mass (case 0 product, 1 two-branch, 2 correlated)",
        &["case", "s_over_big_s", "y", "score", "residual_mass", "coupling", "detected"],
    );
    for (case, name, state, y) in [
        (0.0, "product", &spec.product, spec.product_y),
        (1.0, "two_branch", &spec.two_branch, spec.branch_y),
    ] {
        let wf = state.build(&grid, &spec.units)?;
        let d = detect_effective_wavefunction(&wf, y, &spec.options)?;
        table.push(vec![case, f64::NAN, y, d.overlap_score, d.residual_mass, d.coupling, d.detected() as u8 as f64]);
        report.push(Metric::above(format!("{name}_score"), d.overlap_score, spec.score_threshold));
        report.push(Metric::flag(format!("{name}_detected"), d.detected()));
        if d.detected() {
            let y_row = grid.coord(grid.cell_of(y));
            let row = detect_effective_wavefunction(&wf, y_row, &spec.options)?;
            report.push(Metric::below(
                format!("{name}_guiding_mismatch"),
                guiding_mismatch(&wf, y_row, &row.phi)?,
                spec.guiding_tolerance,
            ));
        }
    }
    let mut scores = Vec::new();
    for &ratio in &spec.ratio_ladder {
        let state = JointState::CorrelatedGaussian { s: ratio * spec.correlated_big_s, big_s: spec.correlated_big_s };
        let wf = state.build(&grid, &spec.units)?;
        let d = detect_effective_wavefunction(&wf, spec.correlated_y, &spec.options)?;
        table.push(vec![2.0, ratio, spec.correlated_y, d.overlap_score, d.residual_mass, d.coupling, d.detected() as u8 as f64]);
        report.push(Metric::info(format!("correlated_score[s/S={ratio}]"), d.overlap_score));
        scores.push((ratio, d.overlap_score));
    }
    let mut by_ratio = scores.clone();
    by_ratio.sort_by(|a, b| b.0.total_cmp(&a.0));
    report.push(Metric::flag(
        "correlated_score_decreasing",
        by_ratio.windows(2).all(|w| w[1].1 < w[0].1),
    ));
    let mut run = ExperimentRun::new(report);
    run.plots.push(
        Plot::new("correlated_scores", "Overlap score vs s/S", "s/S", "score")
            .with(Series::new("score", SeriesStyle::Points, by_ratio.clone()))
            .with(Series::new("1 - tol_eff", SeriesStyle::Line, vec![
                (by_ratio.last().unwrap().0, 1.0 - spec.options.tol_eff),
                (by_ratio[0].0, 1.0 - spec.options.tol_eff),
            ])),
    );
    run.add_table(table);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::two_d(128, 16.0).unwrap()
    }

    fn two_branch() -> JointState {
        JointState::TwoBranch {
            x_centres: [-2.0, 2.0],
            y_centres: [-3.5, 3.5],
            sigma_x: 0.7,
            sigma_y: 0.4,
            momenta_x: [1.0, -0.5],
        }
    }

    #[test]
    fn default_experiment_passes() {
        let run = effective_detection_experiment(&EffectiveDetectSpec::default(), 0).unwrap();
        assert!(run.report.all_pass(), "{:?}", run.report.failures().collect::<Vec<_>>());
        assert_eq!(run.table("detection_scores").unwrap().rows.len(), 5);
    }

    #[test]
    fn product_state_is_detected_exactly() {
        let state = JointState::Product { sigma_x: 0.8, sigma_y: 1.1, x_centre: 0.3, momentum_x: 0.7 };
        let wf = state.build(&grid(), &Units::natural()).unwrap();
        let d = detect_effective_wavefunction(&wf, 0.4, &EffectiveOptions::default()).unwrap();
        assert!(d.detected());
        assert!((d.overlap_score - 1.0).abs() < 1e-12 && d.residual_mass < 1e-20);
        assert_eq!(d.coupling, 0.0);
    }

    #[test]
    fn deep_branch_is_detected() {
        let wf = two_branch().build(&grid(), &Units::natural()).unwrap();
        let d = detect_effective_wavefunction(&wf, -3.4, &EffectiveOptions::default()).unwrap();
        assert!(d.detected() && d.overlap_score > 0.999, "{}", d.overlap_score);
        let g = grid();
        let phi1: Vec<Complex64> = (0..128)
            .map(|i| crate::bohm::states::gaussian_packet(g.coord(i), -2.0, 0.7, 1.0))
            .collect();
        let ov = (d.phi.iter().zip(&phi1).map(|(a, b)| a.conj() * b).sum::<Complex64>() * g.dx()).norm();
        assert!((ov - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_region_is_not_detected() {
        // halfway between the branches both terms are comparable
        let state = JointState::TwoBranch {
            x_centres: [-2.0, 2.0],
            y_centres: [-0.5, 0.5],
            sigma_x: 0.7,
            sigma_y: 0.4,
            momenta_x: [1.0, -0.5],
        };
        let wf = state.build(&grid(), &Units::natural()).unwrap();
        let d = detect_effective_wavefunction(&wf, 0.0, &EffectiveOptions::default()).unwrap();
        assert_eq!(d.status, EffectiveStatus::NotDetected);
    }

    #[test]
    fn correlation_lowers_the_score() {
        let scores: Vec<f64> = [0.8, 0.4, 0.2]
            .iter()
            .map(|&ratio| {
                let state = JointState::CorrelatedGaussian { s: 2.0 * ratio, big_s: 2.0 };
                let wf = state.build(&grid(), &Units::natural()).unwrap();
                detect_effective_wavefunction(&wf, 0.3, &EffectiveOptions::default()).unwrap().overlap_score
            })
            .collect();
        assert!(scores[0] > scores[1] && scores[1] > scores[2], "{scores:?}");
        assert!(scores[2] < 0.999);
    }

    #[test]
    fn detection_is_monotone_in_tolerance() {
        let wf = JointState::CorrelatedGaussian { s: 1.2, big_s: 2.0 }.build(&grid(), &Units::natural()).unwrap();
        let mut seen = false;
        for tol in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.5] {
            let opts = EffectiveOptions { tol_eff: tol, tol_res: tol, ..Default::default() };
            let d = detect_effective_wavefunction(&wf, 0.0, &opts).unwrap();
            assert!(!seen || d.detected());
            seen |= d.detected();
        }
        assert!(seen);
    }

    #[test]
    fn separable_potential_has_no_coupling() {
        let g = grid();
        let state = JointState::Product { sigma_x: 0.8, sigma_y: 1.1, x_centre: 0.0, momentum_x: 0.0 };
        let field = state.build(&g, &Units::natural()).unwrap().field().clone();
        let n = g.points();
        let sep: Vec<f64> = (0..n * n).map(|i| g.coord(i % n).powi(2) + (g.coord(i / n)).cos()).collect();
        let coupled: Vec<f64> = (0..n * n).map(|i| g.coord(i % n) * g.coord(i / n)).collect();
        let a = WaveFunction::new(field.clone(), sep, Units::natural()).unwrap();
        let b = WaveFunction::new(field, coupled, Units::natural()).unwrap();
        let opts = EffectiveOptions::default();
        assert!(detect_effective_wavefunction(&a, 0.2, &opts).unwrap().coupling < 1e-12);
        assert!(detect_effective_wavefunction(&b, 0.2, &opts).unwrap().coupling > 1e-3);
    }

    #[test]
    fn effective_wave_function_guides_the_subsystem() {
        let g = grid();
        let wf = two_branch().build(&g, &Units::natural()).unwrap();
        let iy = g.cell_of(-3.5);
        let d = detect_effective_wavefunction(&wf, g.coord(iy), &EffectiveOptions::default()).unwrap();
        assert!(d.detected());
        let phi = ComplexField::new(Grid::one_d(128, 16.0).unwrap(), d.phi.clone()).unwrap();
        let sub = bohmian_velocity(&WaveFunction::free(phi, Units::natural()).unwrap()).unwrap();
        let full = bohmian_velocity(&wf).unwrap();
        for ix in 0..128 {
            let idx = g.index(ix, iy);
            if full.valid()[idx] && sub.valid()[ix] {
                assert!((full.component(0)[idx] - sub.component(0)[ix]).abs() < 1e-8);
            }
        }
    }
}
