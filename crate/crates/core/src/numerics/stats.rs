use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::BinnedMass;
use super::rng::RngStream;
use crate::error::{domain, Result};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Default typicality threshold τ.
pub const DEFAULT_TAU: f64 = 0.01;

/// Wilson score interval `(lo, hi)` for `hits` successes in `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte Carlo estimate of the measure of a set from indicator hits, with a
/// 99% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MeasureEstimate {
    pub fn from_hits(hits: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials, Z_99);
        let estimate = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        MeasureEstimate { hits, trials, estimate, lo, hi }
    }

    /// Largest distance from the point estimate to either interval end.
    pub fn halfwidth(&self) -> f64 {
        (self.estimate - self.lo).max(self.hi - self.estimate)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn verdict(&self, tau: f64) -> TypicalityVerdict {
        classify_typicality(self.estimate, self.halfwidth(), tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Typical,
    Atypical,
    Neither,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Typical => "typical",
            Classification::Atypical => "atypical",
            Classification::Neither => "neither",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalityVerdict {
    pub estimate: f64,
    pub halfwidth: f64,
    pub tau: f64,
    pub classification: Classification,
}

/// Typical when the whole interval lies above `1 − τ`, atypical when it lies
/// below `τ`, otherwise neither.
pub fn classify_typicality(estimate: f64, halfwidth: f64, tau: f64) -> TypicalityVerdict {
    debug_assert!((0.0..=1.0).contains(&estimate));
    let classification = if estimate - halfwidth > 1.0 - tau {
        Classification::Typical
    } else if estimate + halfwidth < tau {
        Classification::Atypical
    } else {
        Classification::Neither
    };
    TypicalityVerdict { estimate, halfwidth, tau, classification }
}

/// Sample mean and (population) standard deviation.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// The `q`-quantile of the L1 distance between an `n`-point multinomial
/// sample from `target` and `target` itself, by direct simulation over
/// `trials` replicas. This is the sampling-noise floor for an empirical
/// histogram drawn exactly from `target`.
pub fn l1_noise_quantile(
    target: &BinnedMass,
    n: u64,
    q: f64,
    trials: usize,
    stream: RngStream,
) -> Result<f64> {
    if n == 0 || trials == 0 || !(0.0..=1.0).contains(&q) {
        return domain("noise quantile needs n > 0, trials > 0 and q in [0, 1]");
    }
    let masses = target.masses();
    let mut acc = 0.0;
    let cumulative: Vec<f64> = masses
        .iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect();
    let mut distances: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.child(t as u64).rng();
            let mut counts = vec![0u64; masses.len()];
            for _ in 0..n {
                let u: f64 = rng.random::<f64>() * acc;
                let i = cumulative.partition_point(|&c| c <= u).min(masses.len() - 1);
                counts[i] += 1;
            }
            counts
                .iter()
                .zip(masses)
                .map(|(&c, m)| (c as f64 / n as f64 - m).abs())
                .sum::<f64>()
        })
        .collect();
    distances.sort_by(f64::total_cmp);
    let idx = ((q * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    Ok(distances[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{AxisBinning, Binning};

    #[test]
    fn verdict_examples() {
        let c = |m, h| classify_typicality(m, h, DEFAULT_TAU).classification;
        assert_eq!(c(0.999, 0.0005), Classification::Typical);
        assert_eq!(c(0.001, 0.0005), Classification::Atypical);
        assert_eq!(c(0.5, 0.01), Classification::Neither);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z_99);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 1000, Z_99);
        assert_eq!(lo, 0.0);
        // z²/(n + z²) for zero hits
        assert!((hi - Z_99 * Z_99 / (1000.0 + Z_99 * Z_99)).abs() < 1e-15);
    }

    #[test]
    fn wilson_halfwidth_binomial_scale() {
        // 10^5 trials at p = 1/2: half-width ≈ z·sqrt(p(1−p)/n) = 0.00407
        let e = MeasureEstimate::from_hits(50_000, 100_000);
        assert!((e.halfwidth() - Z_99 * (0.25f64 / 1e5).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn noise_quantile_scales_like_inverse_sqrt_n() {
        let b = Binning::one_d(AxisBinning::uniform(0.0, 1.0, 10).unwrap());
        let mut w = vec![1.0; 10];
        w.push(0.0);
        let m = BinnedMass::from_weights(b, w).unwrap();
        let s = RngStream::new(1, 0);
        let q1 = l1_noise_quantile(&m, 1_000, 0.5, 400, s).unwrap();
        let q4 = l1_noise_quantile(&m, 4_000, 0.5, 400, s).unwrap();
        let ratio = q1 / q4;
        assert!((ratio - 2.0).abs() < 0.25, "ratio {ratio}");
        // E L1 ≈ sqrt(2/(πn)) Σ sqrt(p(1−p)) for a uniform 10-bin target
        let approx = (2.0 / (std::f64::consts::PI * 1000.0)).sqrt() * 10.0 * (0.09f64).sqrt();
        assert!((q1 - approx).abs() < 0.15 * approx, "{q1} vs {approx}");
    }
}
