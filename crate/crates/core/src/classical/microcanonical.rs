use rand::Rng;
use rand_distr::StandardNormal;

use super::system::Microstate;
use crate::error::{config, Result};
use crate::numerics::RngStream;

/// Exact draw from the microcanonical measure of an ideal gas of `n`
/// particles of mass `mass` at total energy `energy` in the box
/// `[0, extents_k]`.
///
/// Positions are i.i.d. uniform in the box. The `n·d` momentum components are
/// uniform on the sphere of radius `sqrt(2 m E)`, obtained by normalizing a
/// standard Gaussian vector.
pub fn sample_microcanonical_ideal_gas(
    n: usize,
    extents: &[f64],
    mass: f64,
    energy: f64,
    stream: RngStream,
) -> Result<Microstate> {
    if !(energy.is_finite() && energy > 0.0) {
        return config(format!("energy must be positive, got {energy}"));
    }
    if !(mass > 0.0) || n == 0 || extents.is_empty() || extents.iter().any(|l| !(*l > 0.0)) {
        return config("ideal gas needs n ≥ 1, positive mass and positive box extents");
    }
    let d = extents.len();
    let mut rng = stream.rng();
    let q: Vec<f64> = (0..n * d)
        .map(|k| rng.random::<f64>() * extents[k % d])
        .collect();
    let mut p: Vec<f64> = loop {
        let g: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        if g.iter().any(|x: &f64| *x != 0.0) {
            break g;
        }
    };
    let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = (2.0 * mass * energy).sqrt() / norm;
    p.iter_mut().for_each(|x| *x *= scale);
    Microstate::new(d, q, p)
}
