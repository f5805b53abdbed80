use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::grid::{ComplexField, Grid};
use crate::error::{config, Result};

/// `e^{iθ}` rounded to the neighbouring pair `(cos, sin)` whose modulus is
/// closest to one. Plain rounding leaves a fixed modulus error per factor,
/// and those errors compound coherently when the same factors are applied
/// thousands of times.
pub(crate) fn unit_phase(theta: f64) -> Complex64 {
    let (s0, c0) = theta.sin_cos();
    let residual = |c: f64, s: f64| {
        let (p, q) = (c * c, s * s);
        let (ep, eq) = (c.mul_add(c, -p), s.mul_add(s, -q));
        let sum = p + q;
        let bp = sum - q;
        let err = (p - bp) + (q - (sum - bp));
        ((sum - 1.0) + (err + ep + eq)).abs()
    };
    let mut best = (residual(c0, s0), c0, s0);
    for c in [c0.next_down(), c0, c0.next_up()] {
        for s in [s0.next_down(), s0, s0.next_up()] {
            let r = residual(c, s);
            if r < best.0 {
                best = (r, c, s);
            }
        }
    }
    Complex64::new(best.1, best.2)
}

/// Iterative radix-2 transform, `X_k = Σ_j x_j e^{∓2πijk/n}` without
/// normalization.
#[derive(Debug)]
struct Radix2 {
    n: usize,
    /// `e^{-2πik/n}` for `k < n/2`.
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        // cos/sin of the first octant only; the rest follows by exact swaps
        // and sign changes, so e.g. the quarter-turn factor is exactly -i
        let octant = |m: usize| unit_phase(2.0 * PI * m as f64 / n as f64);
        let twiddles = (0..n / 2)
            .map(|k| {
                let (c, s) = if 8 * k <= n {
                    let z = octant(k);
                    (z.re, z.im)
                } else if 4 * k <= n {
                    let z = octant(n / 4 - k);
                    (z.im, z.re)
                } else if 8 * k <= 3 * n {
                    let z = octant(k - n / 4);
                    (-z.im, z.re)
                } else {
                    let z = octant(n / 2 - k);
                    (-z.re, z.im)
                };
                Complex64::new(c, -s)
            })
            .collect();
        Radix2 { n, twiddles, bitrev }
    }

    fn process(&self, a: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                a.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for block in a.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (u, v)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let w = self.twiddles[j * stride];
                    let w = if inverse { w.conj() } else { w };
                    let t = *v * w;
                    *v = *u - t;
                    *u += t;
                }
            }
            len *= 2;
        }
    }
}

/// Unitary discrete Fourier transform on a power-of-two grid.
///
/// Both directions carry a `1/sqrt(N)` factor, so the transform preserves the
/// Euclidean norm of the amplitude vector. In 2D, rows are transformed first,
/// then columns.
#[derive(Debug, Clone)]
pub struct SpectralPlan {
    grid: Grid,
    radix: Arc<Radix2>,
    scale: f64,
}

impl SpectralPlan {
    pub fn new(grid: &Grid) -> Result<Self> {
        if !grid.is_power_of_two() {
            return config(format!(
                "spectral transforms need a power-of-two grid, got {} points",
                grid.points()
            ));
        }
        Ok(SpectralPlan {
            grid: *grid,
            radix: Arc::new(Radix2::new(grid.points())),
            scale: 1.0 / (grid.total_points() as f64).sqrt(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(false, data, Some(self.scale));
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(true, data, Some(self.scale));
    }

    /// Unnormalized transforms; a forward-inverse pair multiplies by `N`.
    pub(crate) fn forward_unscaled(&self, data: &mut [Complex64]) {
        self.apply(false, data, None);
    }

    pub(crate) fn inverse_unscaled(&self, data: &mut [Complex64]) {
        self.apply(true, data, None);
    }

    fn apply(&self, inverse: bool, data: &mut [Complex64], scale: Option<f64>) {
        assert_eq!(data.len(), self.grid.total_points());
        let n = self.grid.points();
        // rows (or the whole vector in 1D)
        for row in data.chunks_exact_mut(n) {
            self.radix.process(row, inverse);
        }
        if self.grid.dims() == 2 {
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for ix in 0..n {
                for (iy, c) in column.iter_mut().enumerate() {
                    *c = data[iy * n + ix];
                }
                self.radix.process(&mut column, inverse);
                for (iy, c) in column.iter().enumerate() {
                    data[iy * n + ix] = *c;
                }
            }
        }
        if let Some(s) = scale {
            for z in data.iter_mut() {
                *z *= s;
            }
        }
    }

    /// Spectral derivative `∂f/∂x_axis`. The Nyquist mode is dropped, which
    /// keeps the derivative of a real field real.
    pub fn derivative(&self, data: &[Complex64], axis: usize) -> Vec<Complex64> {
        let n = self.grid.points();
        let k = self.grid.wavenumbers();
        let mut spec = data.to_vec();
        self.forward(&mut spec);
        for (idx, z) in spec.iter_mut().enumerate() {
            let j = if axis == 0 { idx % n } else { idx / n };
            let kj = if j == n / 2 { 0.0 } else { k[j] };
            *z *= Complex64::new(0.0, kj);
        }
        self.inverse(&mut spec);
        spec
    }
}

pub fn dft_forward(field: &ComplexField) -> Result<ComplexField> {
    let plan = SpectralPlan::new(field.grid())?;
    let mut out = field.clone();
    plan.forward(out.data_mut());
    Ok(out)
}

pub fn dft_inverse(field: &ComplexField) -> Result<ComplexField> {
    let plan = SpectralPlan::new(field.grid())?;
    let mut out = field.clone();
    plan.inverse(out.data_mut());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Direct O(n²) unitary DFT.
    fn brute_force_dft(input: &[Complex64]) -> Vec<Complex64> {
        let n = input.len();
        (0..n)
            .map(|k| {
                input
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        let ang = -2.0 * PI * (j * k) as f64 / n as f64;
                        x * Complex64::new(ang.cos(), ang.sin())
                    })
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    fn random_field(grid: Grid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..grid.total_points())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexField::new(grid, data).unwrap()
    }

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn constant_maps_to_zero_frequency() {
        let g = Grid::one_d(32, 1.0).unwrap();
        let f = ComplexField::from_fn(g, |_, _| Complex64::new(1.0, 0.0));
        let s = dft_forward(&f).unwrap();
        assert!((s.data()[0] - Complex64::new(32f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!(s.data()[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn plane_wave_is_a_single_mode() {
        let g = Grid::one_d(64, 2.0 * PI).unwrap();
        let mode = 5;
        let f = ComplexField::from_fn(g, |x, _| {
            let a = mode as f64 * x;
            Complex64::new(a.cos(), a.sin())
        });
        let oracle = brute_force_dft(f.data());
        let fast = dft_forward(&f).unwrap();
        assert!(rel_err(fast.data(), &oracle) < 1e-12);
        let nonzero: Vec<_> = fast
            .data()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 1e-9)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(nonzero, vec![mode]);
    }

    #[test]
    fn matches_brute_force_on_random_input() {
        let g = Grid::one_d(128, 3.0).unwrap();
        let f = random_field(g, 7);
        let fast = dft_forward(&f).unwrap();
        assert!(rel_err(fast.data(), &brute_force_dft(f.data())) < 1e-12);
    }

    #[test]
    fn round_trip_and_parseval() {
        for (dims, points) in [(1, 1 << 20), (2, 256)] {
            let g = Grid::new(dims, points, 5.0).unwrap();
            let f = random_field(g, 11);
            let s = dft_forward(&f).unwrap();
            let n0: f64 = f.data().iter().map(|z| z.norm_sqr()).sum();
            let n1: f64 = s.data().iter().map(|z| z.norm_sqr()).sum();
            assert!((n0 - n1).abs() / n0 < 1e-12);
            let back = dft_inverse(&s).unwrap();
            assert!(rel_err(back.data(), f.data()) < 1e-12);
        }
    }

    #[test]
    fn two_d_separable_mode() {
        let g = Grid::two_d(32, 2.0 * PI).unwrap();
        let f = ComplexField::from_fn(g, |x, y| {
            let a = 3.0 * x - 2.0 * y;
            Complex64::new(a.cos(), a.sin())
        });
        let s = dft_forward(&f).unwrap();
        let peak = g.index(3, 32 - 2);
        for (i, z) in s.data().iter().enumerate() {
            if i == peak {
                assert!((z.norm() - 32.0).abs() < 1e-9);
            } else {
                assert!(z.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn non_power_of_two_is_a_config_error() {
        let g = Grid::one_d(24, 1.0).unwrap();
        let err = dft_forward(&ComplexField::zeros(g)).unwrap_err();
        assert!(matches!(err, crate::Error::Config(_)));
    }

    #[test]
    fn derivative_of_sine() {
        let g = Grid::one_d(64, 2.0 * PI).unwrap();
        let plan = SpectralPlan::new(&g).unwrap();
        let f = ComplexField::from_fn(g, |x, _| Complex64::new((3.0 * x).sin(), 0.0));
        let d = plan.derivative(f.data(), 0);
        for (j, z) in d.iter().enumerate() {
            let x = g.coord(j);
            assert!((z.re - 3.0 * (3.0 * x).cos()).abs() < 1e-10);
            assert!(z.im.abs() < 1e-12);
        }
    }
}
