use rand::Rng;
use rayon::prelude::*;

use super::grid::Grid;
use super::rng::RngStream;
use crate::error::{domain, Result};

/// Samples per random stream in [`sample_from_density`]. Fixed so that the
/// output does not depend on the number of worker threads.
const CHUNK: usize = 4096;

/// Draws points from a non-negative density given per grid cell.
///
/// A cell is chosen by inverse CDF over the cumulative cell masses, then the
/// point is placed uniformly inside the cell. The resulting law is the
/// piecewise-constant density that equals the given value on each cell.
#[derive(Debug, Clone)]
pub struct CellSampler {
    grid: Grid,
    cumulative: Vec<f64>,
}

impl CellSampler {
    pub fn new(grid: &Grid, density: &[f64]) -> Result<Self> {
        if density.len() != grid.total_points() {
            return domain(format!(
                "density has {} values, grid has {} points",
                density.len(),
                grid.total_points()
            ));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return domain("density must be finite and non-negative");
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = density
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return domain("density has no positive value");
        }
        let cumulative = cumulative.into_iter().map(|c| c / acc).collect();
        Ok(CellSampler { grid: *grid, cumulative })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Probability mass of each cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let m = c - prev;
                prev = c;
                m
            })
            .collect()
    }

    pub fn draw_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        // skip zero-mass cells at the top when rounding leaves the total < 1
        i.min(self.cumulative.len() - 1)
    }

    /// One point `[x, y]`; `y` is 0 on a 1D grid.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let cell = self.draw_cell(rng);
        let n = self.grid.points();
        let dx = self.grid.dx();
        let (ix, iy) = (cell % n, cell / n);
        let x = self.grid.wrap(self.grid.coord(ix) + (rng.random::<f64>() - 0.5) * dx);
        if self.grid.dims() == 1 {
            [x, 0.0]
        } else {
            let y = self.grid.wrap(self.grid.coord(iy) + (rng.random::<f64>() - 0.5) * dx);
            [x, y]
        }
    }

    /// `n` points, deterministic in `stream`. Work is split into fixed chunks
    /// with one child stream each.
    pub fn sample(&self, n: usize, stream: RngStream) -> Vec<[f64; 2]> {
        let chunks = n.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let len = CHUNK.min(n - c * CHUNK);
                let mut rng = stream.child(c as u64).rng();
                (0..len).map(move |_| self.draw(&mut rng)).collect::<Vec<_>>()
            })
            .collect()
    }
}

pub fn sample_from_density(
    grid: &Grid,
    density: &[f64],
    n: usize,
    stream: RngStream,
) -> Result<Vec<[f64; 2]>> {
    Ok(CellSampler::new(grid, density)?.sample(n, stream))
}
