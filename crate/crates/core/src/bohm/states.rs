//! Closed-form states used as initial data and as oracles.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::wavefunction::{Units, WaveFunction};
use crate::error::{config, Result};
use crate::numerics::{ComplexField, Grid};

/// Normalized Hermite function `h_n(ξ)` by the stable three-term recurrence.
pub fn hermite_function(n: usize, xi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * xi * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Harmonic-oscillator eigenfunction `ψ_n(x)` for `V = m ω² x² / 2`.
pub fn harmonic_eigenfunction(n: usize, x: f64, mass: f64, omega: f64, hbar: f64) -> f64 {
    let a = (mass * omega / hbar).sqrt();
    a.sqrt() * hermite_function(n, a * x)
}

pub fn harmonic_energy(n: usize, omega: f64, hbar: f64) -> f64 {
    hbar * omega * (n as f64 + 0.5)
}

/// `V = Σ_k m_k ω² x_k² / 2` on the grid.
pub fn harmonic_potential(grid: &Grid, units: &Units, omega: f64) -> Vec<f64> {
    let n = grid.points();
    (0..grid.total_points())
        .map(|idx| {
            let x = grid.coord(idx % n);
            let mut v = 0.5 * units.mass(0) * omega * omega * x * x;
            if grid.dims() == 2 {
                let y = grid.coord(idx / n);
                v += 0.5 * units.mass(1) * omega * omega * y * y;
            }
            v
        })
        .collect()
}

/// Superposition `Σ c_n ψ_n(x)` of 1D oscillator eigenstates at `t = 0`,
/// normalized, in the oscillator potential.
pub fn harmonic_superposition(
    grid: &Grid,
    units: &Units,
    omega: f64,
    coefficients: &[(usize, Complex64)],
) -> Result<WaveFunction> {
    if grid.dims() != 1 {
        return config("oscillator superpositions are one-dimensional");
    }
    if coefficients.is_empty() {
        return config("need at least one eigenstate");
    }
    let (m, hbar) = (units.mass(0), units.hbar);
    let field = ComplexField::from_fn(*grid, |x, _| {
        coefficients
            .iter()
            .map(|&(n, c)| c * harmonic_eigenfunction(n, x, m, omega, hbar))
            .sum()
    });
    WaveFunction::new(field, harmonic_potential(grid, units, omega), units.clone())
}

/// `Σ c_n e^{−iE_n t/ħ} ψ_n(x)`, unnormalized coefficients as given.
pub fn harmonic_superposition_at(
    x: f64,
    t: f64,
    units: &Units,
    omega: f64,
    coefficients: &[(usize, Complex64)],
) -> Complex64 {
    let (m, hbar) = (units.mass(0), units.hbar);
    coefficients
        .iter()
        .map(|&(n, c)| {
            let phase = -harmonic_energy(n, omega, hbar) * t / hbar;
            c * Complex64::from_polar(1.0, phase) * harmonic_eigenfunction(n, x, m, omega, hbar)
        })
        .sum()
}

/// Gaussian packet `(2πσ²)^{-1/4} exp(−(x−x₀)²/4σ² + i k₀ x)`; `|ψ|²` has
/// standard deviation `σ`.
pub fn gaussian_packet(x: f64, x0: f64, sigma: f64, k0: f64) -> Complex64 {
    let amp = (2.0 * PI * sigma * sigma).powf(-0.25) * (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
    Complex64::from_polar(amp, k0 * x)
}

/// Free Gaussian packet centred at `x₀` with zero mean momentum.
pub fn free_gaussian(grid: &Grid, units: &Units, x0: f64, sigma: f64) -> Result<WaveFunction> {
    if !(sigma > 0.0) {
        return config("packet width must be positive");
    }
    let field = ComplexField::from_fn(*grid, |x, y| {
        let mut z = gaussian_packet(x, x0, sigma, 0.0);
        if grid.dims() == 2 {
            z *= gaussian_packet(y, 0.0, sigma, 0.0);
        }
        z
    });
    WaveFunction::free(field, units.clone())
}

/// Spreading time scale `2mσ₀²/ħ`.
pub fn spreading_time(sigma0: f64, mass: f64, hbar: f64) -> f64 {
    2.0 * mass * sigma0 * sigma0 / hbar
}

/// `σ(t) = σ₀ √(1 + (ħt / 2mσ₀²)²)`
pub fn free_gaussian_width(sigma0: f64, t: f64, mass: f64, hbar: f64) -> f64 {
    let s = t / spreading_time(sigma0, mass, hbar);
    sigma0 * (1.0 + s * s).sqrt()
}

/// `σ′(t)/σ(t)`, the slope of the Bohmian velocity profile `v = x σ′/σ`
/// of a free Gaussian centred at the origin.
pub fn free_gaussian_velocity_slope(sigma0: f64, t: f64, mass: f64, hbar: f64) -> f64 {
    let tau = spreading_time(sigma0, mass, hbar);
    let s = t / tau;
    s / (tau * (1.0 + s * s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_functions_are_orthonormal() {
        // trapezoid quadrature on a wide fine grid as the oracle
        let h = 1e-3;
        let xs: Vec<f64> = (0..=24_000).map(|i| -12.0 + i as f64 * h).collect();
        for a in 0..6 {
            for b in 0..6 {
                let ip: f64 = xs.iter().map(|&x| hermite_function(a, x) * hermite_function(b, x)).sum::<f64>() * h;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-10, "{a} {b} {ip}");
            }
        }
    }

    #[test]
    fn low_order_closed_forms() {
        let x: f64 = 0.7;
        let g = PI.powf(-0.25) * (-0.5 * x * x).exp();
        assert!((hermite_function(1, x) - 2f64.sqrt() * x * g).abs() < 1e-15);
        assert!((hermite_function(2, x) - (2.0 * x * x - 1.0) / 2f64.sqrt() * g).abs() < 1e-15);
    }

    #[test]
    fn width_law() {
        assert_eq!(free_gaussian_width(1.0, 0.0, 1.0, 1.0), 1.0);
        assert!((free_gaussian_width(1.0, 2.0, 1.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
        // slope equals d/dt log σ by central differences
        let (s0, t, h) = (0.7, 1.3, 1e-5);
        let fd = (free_gaussian_width(s0, t + h, 1.0, 1.0).ln() - free_gaussian_width(s0, t - h, 1.0, 1.0).ln()) / (2.0 * h);
        assert!((fd - free_gaussian_velocity_slope(s0, t, 1.0, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn superposition_is_normalized_on_grid() {
        let g = Grid::one_d(256, 20.0).unwrap();
        let c = Complex64::new(1.0, 0.0);
        let wf = harmonic_superposition(&g, &Units::natural(), 1.0, &[(0, c), (1, c)]).unwrap();
        assert!((wf.norm() - 1.0).abs() < 1e-14);
        let z = harmonic_superposition_at(0.3, 0.0, &Units::natural(), 1.0, &[(0, c), (1, c)]);
        assert!(z.im.abs() < 1e-15);
    }
}
