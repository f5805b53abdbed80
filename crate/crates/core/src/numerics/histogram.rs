use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{domain, Result};

/// Strictly increasing bin edges along one axis; bins are half-open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBinning {
    edges: Vec<f64>,
}

impl AxisBinning {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return domain("binning needs at least two edges");
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return domain("bin edges must be finite and strictly increasing");
        }
        Ok(AxisBinning { edges })
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(lo < hi) {
            return domain(format!("invalid uniform binning [{lo}, {hi}) with {bins} bins"));
        }
        let w = (hi - lo) / bins as f64;
        Self::new((0..=bins).map(|i| lo + i as f64 * w).collect())
    }

    /// Uniform bins whose edges fall on cell boundaries of `grid`, covering
    /// as much of `[lo, hi)` as a whole number of cells per bin allows.
    pub fn cell_aligned(grid: &Grid, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        let dx = grid.dx();
        let half = 0.5 * grid.length();
        let lo = lo.max(-half + 0.5 * dx);
        let hi = hi.min(half - 0.5 * dx);
        // boundaries sit at -L/2 + (j - 1/2) dx
        let first = ((lo + half) / dx + 0.5).ceil();
        let last = ((hi + half) / dx + 0.5).floor();
        let cells = (last - first) as i64;
        if bins == 0 || cells < bins as i64 {
            return domain(format!(
                "cannot fit {bins} cell-aligned bins in [{lo}, {hi})"
            ));
        }
        let per_bin = (cells / bins as i64) as f64;
        let start = first + ((cells as f64 - per_bin * bins as f64) / 2.0).floor();
        Self::new(
            (0..=bins)
                .map(|b| -half + (start + b as f64 * per_bin - 0.5) * dx)
                .collect(),
        )
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.edges[0] && x < self.edges[self.edges.len() - 1]) {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= x) - 1)
    }

    /// `(bin, fraction of cell)` pairs for cell `j` of a periodic grid axis.
    fn cell_overlaps(&self, grid: &Grid, j: usize) -> Vec<(usize, f64)> {
        let dx = grid.dx();
        let half = 0.5 * grid.length();
        let c = grid.coord(j);
        let pieces: Vec<(f64, f64)> = if j == 0 {
            // the first cell straddles the periodic seam
            vec![(-half, -half + 0.5 * dx), (half - 0.5 * dx, half)]
        } else {
            vec![(c - 0.5 * dx, c + 0.5 * dx)]
        };
        let mut out = Vec::new();
        for (a, b) in pieces {
            let first = self.edges.partition_point(|&e| e <= a).saturating_sub(1);
            for bin in first..self.bins() {
                let (lo, hi) = (self.edges[bin], self.edges[bin + 1]);
                if lo >= b {
                    break;
                }
                let overlap = b.min(hi) - a.max(lo);
                if overlap > 0.0 {
                    out.push((bin, overlap / dx));
                }
            }
        }
        out
    }
}

/// One or two binned axes plus an overflow bin that collects everything
/// outside the binned region. Flat bin index is `ix + nx*iy`; the overflow bin
/// is last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    axes: Vec<AxisBinning>,
}

impl Binning {
    pub fn new(axes: Vec<AxisBinning>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return domain("binning must have one or two axes");
        }
        Ok(Binning { axes })
    }

    pub fn one_d(axis: AxisBinning) -> Self {
        Binning { axes: vec![axis] }
    }

    pub fn axes(&self) -> &[AxisBinning] {
        &self.axes
    }

    /// Number of bins including overflow.
    pub fn len(&self) -> usize {
        self.inner_bins() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn inner_bins(&self) -> usize {
        self.axes.iter().map(AxisBinning::bins).product()
    }

    pub fn overflow(&self) -> usize {
        self.inner_bins()
    }

    pub fn locate(&self, point: &[f64]) -> usize {
        let mut flat = 0;
        let mut stride = 1;
        for (axis, &x) in self.axes.iter().zip(point) {
            match axis.locate(x) {
                Some(b) => flat += b * stride,
                None => return self.overflow(),
            }
            stride *= axis.bins();
        }
        flat
    }
}

/// Bin counts of a finite sample; the counts (overflow included) sum to `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    binning: Binning,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn from_points<'a, I>(binning: Binning, points: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut counts = vec![0u64; binning.len()];
        let mut total = 0;
        for p in points {
            counts[binning.locate(p)] += 1;
            total += 1;
        }
        EmpiricalDistribution { binning, counts, total }
    }

    pub fn from_values(binning: Binning, values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = vec![0u64; binning.len()];
        let mut total = 0;
        for v in values {
            counts[binning.locate(&[v])] += 1;
            total += 1;
        }
        EmpiricalDistribution { binning, counts, total }
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn masses(&self) -> Result<BinnedMass> {
        BinnedMass::from_weights(
            self.binning.clone(),
            self.counts.iter().map(|&c| c as f64).collect(),
        )
    }
}

/// Normalized probability masses over a [`Binning`] (overflow included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedMass {
    binning: Binning,
    masses: Vec<f64>,
}

impl BinnedMass {
    pub fn from_weights(binning: Binning, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != binning.len() {
            return domain(format!(
                "{} weights for {} bins",
                weights.len(),
                binning.len()
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return domain("bin weights must be finite and non-negative");
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return domain("bin weights sum to zero");
        }
        Ok(BinnedMass {
            binning,
            masses: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Exact bin masses of the piecewise-constant density that takes value
    /// `density[i]` on grid cell `i`. Matches the law drawn by
    /// [`CellSampler`](super::CellSampler).
    pub fn from_grid_density(binning: Binning, grid: &Grid, density: &[f64]) -> Result<Self> {
        if binning.axes().len() != grid.dims() {
            return domain("binning and grid dimensions differ");
        }
        if density.len() != grid.total_points() {
            return domain("density length does not match grid");
        }
        let n = grid.points();
        let per_axis: Vec<Vec<Vec<(usize, f64)>>> = binning
            .axes()
            .iter()
            .map(|a| (0..n).map(|j| a.cell_overlaps(grid, j)).collect())
            .collect();
        let mut weights = vec![0.0; binning.len()];
        let total: f64 = density.iter().sum();
        let mut inside = 0.0;
        if grid.dims() == 1 {
            for (j, &d) in density.iter().enumerate() {
                for &(b, f) in &per_axis[0][j] {
                    weights[b] += d * f;
                    inside += d * f;
                }
            }
        } else {
            let nx_bins = binning.axes()[0].bins();
            for iy in 0..n {
                for ix in 0..n {
                    let d = density[iy * n + ix];
                    if d == 0.0 {
                        continue;
                    }
                    for &(by, fy) in &per_axis[1][iy] {
                        for &(bx, fx) in &per_axis[0][ix] {
                            let w = d * fx * fy;
                            weights[by * nx_bins + bx] += w;
                            inside += w;
                        }
                    }
                }
            }
        }
        weights[binning.overflow()] = (total - inside).max(0.0);
        Self::from_weights(binning, weights)
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// `Σ |p_a − p_b|` over bins, in `[0, 2]`.
pub fn l1_distance(a: &BinnedMass, b: &BinnedMass) -> Result<f64> {
    if a.binning != b.binning {
        return domain("l1 distance between differently binned distributions");
    }
    Ok(a.masses
        .iter()
        .zip(&b.masses)
        .map(|(x, y)| (x - y).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn axis(bins: usize) -> Binning {
        Binning::one_d(AxisBinning::uniform(0.0, 1.0, bins).unwrap())
    }

    #[test]
    fn identical_and_disjoint() {
        let a = BinnedMass::from_weights(axis(4), vec![1.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        let b = BinnedMass::from_weights(axis(4), vec![0.0, 0.0, 3.0, 1.0, 0.0]).unwrap();
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        assert!((l1_distance(&a, &b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_bins_is_a_domain_error() {
        let a = BinnedMass::from_weights(axis(4), vec![1.0; 5]).unwrap();
        let b = BinnedMass::from_weights(axis(3), vec![1.0; 4]).unwrap();
        assert!(matches!(l1_distance(&a, &b), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn shifted_gaussians() {
        // oracle: trapezoidal integral of |φ(x) − φ(x − 1)| on a fine mesh
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let h = 1e-4;
        let oracle: f64 = (0..=200_000)
            .map(|i| {
                let x = -10.0 + i as f64 * h;
                let w = if i == 0 || i == 200_000 { 0.5 } else { 1.0 };
                w * (phi(x) - phi(x - 1.0)).abs() * h
            })
            .sum();
        assert!((oracle - 0.765_849_845_096_052_5).abs() < 1e-8);

        let binning = Binning::one_d(AxisBinning::uniform(-10.0, 11.0, 4200).unwrap());
        let weights = |shift: f64| {
            let e = binning.axes()[0].edges().to_vec();
            let mut w: Vec<f64> = e.windows(2).map(|w| phi(0.5 * (w[0] + w[1]) - shift)).collect();
            w.push(0.0);
            w
        };
        let (w0, w1) = (weights(0.0), weights(1.0));
        let a = BinnedMass::from_weights(binning.clone(), w0).unwrap();
        let b = BinnedMass::from_weights(binning, w1).unwrap();
        assert!((l1_distance(&a, &b).unwrap() - oracle).abs() < 1e-4);
    }

    #[test]
    fn counts_sum_to_total_with_overflow() {
        let e = EmpiricalDistribution::from_values(axis(4), [0.1, 0.3, 0.99, 1.0, -0.2, 0.5]);
        assert_eq!(e.total(), 6);
        assert_eq!(e.counts().iter().sum::<u64>(), 6);
        assert_eq!(e.counts()[4], 2);
    }

    #[test]
    fn cell_aligned_edges_fall_on_cell_boundaries() {
        let g = Grid::one_d(64, 8.0).unwrap();
        let a = AxisBinning::cell_aligned(&g, -2.0, 2.0, 8).unwrap();
        let dx = g.dx();
        for e in a.edges() {
            let k = (e + 4.0) / dx + 0.5;
            assert!((k - k.round()).abs() < 1e-9);
        }
        assert_eq!(a.bins(), 8);
        assert!(AxisBinning::cell_aligned(&g, -0.1, 0.1, 8).is_err());
    }

    #[test]
    fn grid_density_masses_are_exact_cell_sums() {
        let g = Grid::one_d(32, 4.0).unwrap();
        let d: Vec<f64> = (0..32).map(|i| 1.0 + i as f64).collect();
        let axis = AxisBinning::cell_aligned(&g, -1.0, 1.0, 4).unwrap();
        let m = BinnedMass::from_grid_density(Binning::one_d(axis.clone()), &g, &d).unwrap();
        let total: f64 = d.iter().sum();
        let expect: f64 = (0..32)
            .filter(|&j| axis.locate(g.coord(j)).is_some())
            .map(|j| d[j])
            .sum::<f64>()
            / total;
        let inner: f64 = m.masses()[..4].iter().sum();
        assert!((inner - expect).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn l1_is_a_metric(
            a in prop::collection::vec(0.0f64..1.0, 6),
            b in prop::collection::vec(0.0f64..1.0, 6),
            c in prop::collection::vec(0.0f64..1.0, 6),
        ) {
            let mk = |mut w: Vec<f64>| { w[0] += 1e-3; BinnedMass::from_weights(axis(5), w).unwrap() };
            let (a, b, c) = (mk(a), mk(b), mk(c));
            let ab = l1_distance(&a, &b).unwrap();
            prop_assert!((ab - l1_distance(&b, &a).unwrap()).abs() < 1e-15);
            prop_assert!(ab <= l1_distance(&a, &c).unwrap() + l1_distance(&c, &b).unwrap() + 1e-12);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        }
    }
}
