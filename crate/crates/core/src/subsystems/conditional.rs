use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bohm::WaveFunction;
use crate::error::{config, Error, Result};
use crate::numerics::{ComplexField, Grid};

/// Slices whose norm falls below this fraction of the largest row norm are
/// degenerate.
pub const SLICE_THRESHOLD: f64 = 1e-10;

/// Configuration `Q = (X, Y)` split into subsystem (grid axis 0) and
/// environment (grid axis 1) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfiguration {
    pub x: f64,
    pub y: f64,
}

impl SplitConfiguration {
    pub fn from_point(q: [f64; 2]) -> Self {
        SplitConfiguration { x: q[0], y: q[1] }
    }
}

/// `ψ^Y(x) = Ψ(x, Y)`, kept unnormalized, with `slice_norm = ∫|Ψ(x, Y)|² dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalWaveFunction {
    field: ComplexField,
    y: f64,
    slice_norm: f64,
    time: f64,
}

impl ConditionalWaveFunction {
    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    /// The raw slice.
    pub fn slice(&self) -> &[Complex64] {
        self.field.data()
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn slice_norm(&self) -> f64 {
        self.slice_norm
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Unit-norm copy of the slice.
    pub fn normalized(&self) -> Vec<Complex64> {
        let s = 1.0 / self.slice_norm.sqrt();
        self.field.data().iter().map(|z| z * s).collect()
    }

    /// `|ψ^Y(x)|²` normalized to a probability density in `x`.
    pub fn density(&self) -> Vec<f64> {
        self.field.data().iter().map(|z| z.norm_sqr() / self.slice_norm).collect()
    }

    /// The slice as a one-dimensional wave function with the subsystem's
    /// mass, e.g. to compute the velocity it generates.
    pub fn wave_function(&self, full: &WaveFunction) -> Result<WaveFunction> {
        let units = crate::bohm::Units { masses: vec![full.mass(0)], ..full.units().clone() };
        Ok(WaveFunction::free(self.field.clone(), units)?.at_time(self.time))
    }
}

fn row_norms(wf: &WaveFunction) -> Vec<f64> {
    let n = wf.grid().points();
    let dx = wf.grid().dx();
    wf.data().chunks_exact(n).map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).collect()
}

/// Row of `Ψ` at environment coordinate `y`, linearly interpolated between
/// the two bracketing grid rows.
pub fn conditional_wavefunction(wf: &WaveFunction, y: f64) -> Result<ConditionalWaveFunction> {
    let grid = *wf.grid();
    if grid.dims() != 2 {
        return config("conditional wave functions need a 2D grid with an (x, y) split");
    }
    let max_norm = row_norms(wf).into_iter().fold(0.0, f64::max);
    slice_at(wf, y, SLICE_THRESHOLD * max_norm)
}

pub(crate) fn slice_at(wf: &WaveFunction, y: f64, min_norm: f64) -> Result<ConditionalWaveFunction> {
    let grid = *wf.grid();
    let n = grid.points();
    let fy = grid.fractional_index(y);
    let iy = (fy.floor() as usize).min(n - 1);
    let w = fy - iy as f64;
    let iy1 = (iy + 1) % n;
    let data = wf.data();
    let row: Vec<Complex64> = (0..n)
        .map(|ix| {
            let a = data[grid.index(ix, iy)];
            if w == 0.0 {
                a
            } else {
                a * (1.0 - w) + data[grid.index(ix, iy1)] * w
            }
        })
        .collect();
    let line = Grid::one_d(n, grid.length())?;
    let slice_norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>() * line.dx();
    if !(slice_norm > min_norm) {
        return Err(Error::DegenerateSlice { y, norm: slice_norm });
    }
    Ok(ConditionalWaveFunction { field: ComplexField::new(line, row)?, y, slice_norm, time: wf.time() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohm::{bohmian_velocity, Units};
    use crate::subsystems::joint::JointState;

    fn overlap(a: &[Complex64], b: &[Complex64], dx: f64) -> f64 {
        (a.iter().zip(b).map(|(u, v)| u.conj() * v).sum::<Complex64>() * dx).norm()
    }

    fn product() -> JointState {
        JointState::Product { sigma_x: 0.8, sigma_y: 1.2, x_centre: 0.5, momentum_x: 1.5 }
    }

    #[test]
    fn product_slices_do_not_depend_on_y() {
        let g = Grid::two_d(128, 16.0).unwrap();
        let wf = product().build(&g, &Units::natural()).unwrap();
        let a = conditional_wavefunction(&wf, -1.3).unwrap().normalized();
        for y in [-2.0, 0.0, 0.77, 2.5] {
            let b = conditional_wavefunction(&wf, y).unwrap().normalized();
            assert!((overlap(&a, &b, g.dx()) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn two_branch_slice_picks_its_branch() {
        let g = Grid::two_d(128, 16.0).unwrap();
        let state = JointState::TwoBranch {
            x_centres: [-2.0, 2.0],
            y_centres: [-3.0, 3.0],
            sigma_x: 0.7,
            sigma_y: 0.4,
            momenta_x: [0.0, 0.0],
        };
        let wf = state.build(&g, &Units::natural()).unwrap();
        let psi = conditional_wavefunction(&wf, -3.1).unwrap();
        let phi1: Vec<Complex64> = (0..128).map(|i| crate::bohm::states::gaussian_packet(g.coord(i), -2.0, 0.7, 0.0)).collect();
        assert!((overlap(&psi.normalized(), &phi1, g.dx()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn off_grid_slices_converge_under_refinement() {
        // linear interpolation in y errs by about w(1 − w)dy²/2 · ∂²Ψ; at
        // y = 1/12 the weight w(1 − w) is 2/9 on all three grids, so each
        // doubling should cut the error by about four
        let state = JointState::CorrelatedGaussian { s: 0.6, big_s: 2.0 };
        let y = 1.0 / 12.0;
        let errors: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| {
                let g = Grid::two_d(n, 16.0).unwrap();
                let wf = state.build(&g, &Units::natural()).unwrap();
                let got = conditional_wavefunction(&wf, y).unwrap().normalized();
                let exact: Vec<Complex64> = (0..n).map(|i| state.amplitude(g.coord(i), y)).collect();
                let norm = (exact.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dx()).sqrt();
                got.iter().zip(&exact).map(|(a, b)| (a - b / norm).norm()).fold(0.0, f64::max)
            })
            .collect();
        assert!(errors[1] < errors[0] / 3.0 && errors[2] < errors[1] / 3.0, "{errors:?}");
    }

    #[test]
    fn slices_rebuild_the_marginal() {
        let g = Grid::two_d(64, 12.0).unwrap();
        let wf = JointState::CorrelatedGaussian { s: 0.5, big_s: 2.0 }.build(&g, &Units::natural()).unwrap();
        let rho = wf.density();
        let n = g.points();
        let mut rebuilt = vec![0.0; n];
        for iy in 0..n {
            let c = conditional_wavefunction(&wf, g.coord(iy)).unwrap();
            for (r, d) in rebuilt.iter_mut().zip(c.density()) {
                *r += d * c.slice_norm() * g.dx();
            }
        }
        for ix in 0..n {
            let marginal: f64 = (0..n).map(|iy| rho[g.index(ix, iy)]).sum::<f64>() * g.dx();
            assert!((marginal - rebuilt[ix]).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_slices_are_refused() {
        let g = Grid::two_d(64, 16.0).unwrap();
        let state = JointState::TwoBranch {
            x_centres: [-2.0, 2.0],
            y_centres: [-3.0, 3.0],
            sigma_x: 0.7,
            sigma_y: 0.3,
            momenta_x: [0.0, 0.0],
        };
        let wf = state.build(&g, &Units::natural()).unwrap();
        assert!(matches!(conditional_wavefunction(&wf, 7.5), Err(Error::DegenerateSlice { .. })));
        let one_d = WaveFunction::free(ComplexField::from_fn(Grid::one_d(64, 8.0).unwrap(), |_, _| Complex64::new(1.0, 0.0)), Units::natural()).unwrap();
        assert!(conditional_wavefunction(&one_d, 0.0).is_err());
    }

    #[test]
    fn slice_guides_like_the_full_state() {
        let g = Grid::two_d(128, 16.0).unwrap();
        let units = Units { masses: vec![1.7, 0.6], ..Units::natural() };
        let wf = product().build(&g, &units).unwrap();
        let full = bohmian_velocity(&wf).unwrap();
        let iy = 70;
        let c = conditional_wavefunction(&wf, g.coord(iy)).unwrap();
        let sub = bohmian_velocity(&c.wave_function(&wf).unwrap()).unwrap();
        for ix in 0..128 {
            let idx = g.index(ix, iy);
            if full.valid()[idx] && sub.valid()[ix] {
                assert!((full.component(0)[idx] - sub.component(0)[ix]).abs() < 1e-8);
            }
        }
    }
}
