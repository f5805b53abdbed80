use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Uniform periodic grid on `[-L/2, L/2)` along each axis.
///
/// Grid point `j` sits at `-L/2 + j*dx` and is the centre of its cell. In two
/// dimensions storage is row-major with `x` as the fast axis, so a row is a
/// line of constant `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: usize,
    points: usize,
    length: f64,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(dims: usize, points: usize, length: f64) -> Result<Self> {
        if dims != 1 && dims != 2 {
            return config(format!("grid dimension must be 1 or 2, got {dims}"));
        }
        if points < Self::MIN_POINTS {
            return config(format!(
                "grid needs at least {} points per axis, got {points}",
                Self::MIN_POINTS
            ));
        }
        if !(length.is_finite() && length > 0.0) {
            return config(format!("grid length must be positive, got {length}"));
        }
        Ok(Grid { dims, points, length })
    }

    pub fn one_d(points: usize, length: f64) -> Result<Self> {
        Self::new(1, points, length)
    }

    pub fn two_d(points: usize, length: f64) -> Result<Self> {
        Self::new(2, points, length)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn total_points(&self) -> usize {
        self.points.pow(self.dims as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dims as i32)
    }

    pub fn is_power_of_two(&self) -> bool {
        self.points.is_power_of_two()
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.coord(j)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let dk = 2.0 * PI / self.length;
        (0..n)
            .map(|j| if j < (n + 1) / 2 { j } else { j - n } as f64 * dk)
            .collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dx()
    }

    /// Flat index of `(ix, iy)`; `iy` is ignored in 1D.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        if self.dims == 1 {
            ix
        } else {
            iy * self.points + ix
        }
    }

    /// Wraps a coordinate into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let half = 0.5 * self.length;
        let w = (x + half).rem_euclid(self.length) - half;
        // rem_euclid can round up to exactly L
        if w >= half {
            -half
        } else {
            w
        }
    }

    /// Fractional grid index of a coordinate, in `[0, points)`.
    pub fn fractional_index(&self, x: f64) -> f64 {
        let f = (x + 0.5 * self.length) / self.dx();
        let n = self.points as f64;
        let r = f.rem_euclid(n);
        if r >= n {
            0.0
        } else {
            r
        }
    }

    /// Index of the cell containing `x` (cells are centred on grid points).
    pub fn cell_of(&self, x: f64) -> usize {
        let j = (self.fractional_index(x) + 0.5).floor() as usize;
        j % self.points
    }
}

/// Complex amplitudes on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.total_points() {
            return domain(format!(
                "field has {} amplitudes, grid has {} points",
                data.len(),
                grid.total_points()
            ));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return domain("field contains non-finite amplitudes");
        }
        Ok(ComplexField { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        ComplexField {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.total_points()],
        }
    }

    /// Evaluates `f(x, y)` at every grid point (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let xs = grid.coords();
        let data = if grid.dims() == 1 {
            xs.iter().map(|&x| f(x, 0.0)).collect()
        } else {
            let mut d = Vec::with_capacity(grid.total_points());
            for &y in &xs {
                for &x in &xs {
                    d.push(f(x, y));
                }
            }
            d
        };
        ComplexField { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// `∫|f|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scales to unit L² norm; fails on the zero field.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return domain("cannot normalize a field with zero norm");
        }
        let s = 1.0 / norm;
        for z in &mut self.data {
            *z *= s;
        }
        Ok(norm)
    }

    /// `|f|²` at each grid point.
    pub fn density(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `⟨self, other⟩ = ∫ conj(self)·other`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if self.grid != other.grid {
            return domain("inner product of fields on different grids");
        }
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(Grid::one_d(8, 1.0).is_err());
        assert!(Grid::one_d(16, 0.0).is_err());
        assert!(Grid::new(3, 16, 1.0).is_err());
        assert!(Grid::one_d(24, 1.0).is_ok());
    }

    #[test]
    fn wrapping_is_periodic() {
        let g = Grid::one_d(16, 4.0).unwrap();
        assert_eq!(g.wrap(2.0), -2.0);
        assert!((g.wrap(2.5) + 1.5).abs() < 1e-15);
        assert!((g.wrap(-2.5) - 1.5).abs() < 1e-15);
        assert_eq!(g.cell_of(-2.0), 0);
        assert_eq!(g.cell_of(1.99), 0);
        assert_eq!(g.cell_of(0.0), 8);
    }

    #[test]
    fn wavenumbers_in_fft_order() {
        let g = Grid::one_d(16, 2.0 * PI).unwrap();
        let k = g.wavenumbers();
        assert_eq!(k[1], 1.0);
        assert_eq!(k[8], -8.0);
        assert_eq!(k[15], -1.0);
    }

    #[test]
    fn normalization_and_inner_product() {
        let g = Grid::one_d(64, 10.0).unwrap();
        let mut f = ComplexField::from_fn(g, |x, _| Complex64::new((-x * x).exp(), 0.0));
        f.normalize().unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-14);
        assert!((f.inner(&f).unwrap().re - 1.0).abs() < 1e-14);
        assert!(ComplexField::zeros(g).normalize().is_err());
    }
}
