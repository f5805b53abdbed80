use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::{HamiltonianSystem, Microstate};
use super::verlet::Verlet;
use crate::error::{config, Result};
use crate::numerics::{MeasureEstimate, RngStream};
use crate::report::{DataTable, ExperimentReport, ExperimentRun, Metric, Plot, Series, SeriesStyle};

const CHUNK: usize = 4096;

/// Coordinate-aligned box in phase space; coordinates ordered `(q, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl PhaseBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = PhaseBox { lo, hi };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return config("phase box bounds must be non-empty and of equal length");
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b && a.is_finite() && b.is_finite())) {
            return config("phase box needs lo < hi on every axis");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleOptions {
    pub dt: f64,
    pub n_samples: usize,
    /// Box assumed to contain the image of the region. Derived from
    /// propagated probe points when absent.
    pub reference: Option<PhaseBox>,
    /// Relative inflation of the automatic reference box.
    pub margin: f64,
    pub probe_samples: usize,
}

impl Default for LiouvilleOptions {
    fn default() -> Self {
        LiouvilleOptions {
            dt: 1e-2,
            n_samples: 100_000,
            reference: None,
            margin: 0.1,
            probe_samples: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleReport {
    pub time: f64,
    pub steps: usize,
    /// Fraction of the reference box whose backward image lands in the region.
    pub fraction: MeasureEstimate,
    pub region_volume: f64,
    pub reference_volume: f64,
    /// Estimate of `λ(Φ_t A) / λ(A)` with its 99% interval.
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

impl LiouvilleReport {
    pub fn halfwidth(&self) -> f64 {
        (self.ratio - self.ratio_lo).max(self.ratio_hi - self.ratio)
    }

    pub fn consistent_with_one(&self) -> bool {
        self.ratio_lo <= 1.0 && 1.0 <= self.ratio_hi
    }
}

struct Flow<'a> {
    system: &'a HamiltonianSystem,
    verlet: Verlet,
    steps: usize,
}

impl Flow<'_> {
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = Microstate::from_phase_point(self.system.dims(), x)?;
        Ok(self.verlet.run(self.system, &s, self.steps)?.phase_point())
    }

    /// `Φ_{−t}` through time reversal: flip momenta, flow forward, flip back.
    fn backward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut s = Microstate::from_phase_point(self.system.dims(), x)?;
        s.reverse();
        let mut s = self.verlet.run(self.system, &s, self.steps)?;
        s.reverse();
        Ok(s.phase_point())
    }
}

/// Estimates `λ(Φ_t A)/λ(A)` by sampling a reference box `B ⊇ Φ_t A`
/// uniformly and counting points whose backward image lies in `A`.
pub fn liouville_volume_check(
    system: &HamiltonianSystem,
    region: &PhaseBox,
    t: f64,
    options: &LiouvilleOptions,
    stream: RngStream,
) -> Result<LiouvilleReport> {
    region.validate()?;
    if system.has_singular_terms() {
        return config("the volume check needs a globally defined flow; inverse-distance terms are excluded");
    }
    if region.dim() != 2 * system.dims() * system.particles() {
        return config("region dimension does not match the phase space");
    }
    if !(t >= 0.0 && t.is_finite()) || options.n_samples == 0 {
        return config("need t ≥ 0 and at least one sample");
    }
    let steps = (t / options.dt).ceil() as usize;
    let verlet = Verlet::new(if steps == 0 { options.dt } else { t / steps as f64 })?;
    verlet.check_stability(system)?;
    let flow = Flow { system, verlet, steps };

    let reference = match &options.reference {
        Some(b) => {
            b.validate()?;
            if b.dim() != region.dim() {
                return config("reference box dimension does not match the region");
            }
            b.clone()
        }
        None => auto_reference(&flow, region, options, stream.child(u64::MAX))?,
    };

    let chunks = options.n_samples.div_ceil(CHUNK);
    let hits: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<u64> {
            let mut rng = stream.child(c as u64).rng();
            let len = CHUNK.min(options.n_samples - c * CHUNK);
            let mut h = 0;
            for _ in 0..len {
                let z = reference.sample(&mut rng);
                if region.contains(&flow.backward(&z)?) {
                    h += 1;
                }
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;
    let fraction = MeasureEstimate::from_hits(hits.iter().sum(), options.n_samples as u64);
    let scale = reference.volume() / region.volume();
    Ok(LiouvilleReport {
        time: t,
        steps,
        fraction,
        region_volume: region.volume(),
        reference_volume: reference.volume(),
        ratio: fraction.estimate * scale,
        ratio_lo: fraction.lo * scale,
        ratio_hi: fraction.hi * scale,
    })
}

fn auto_reference(
    flow: &Flow<'_>,
    region: &PhaseBox,
    options: &LiouvilleOptions,
    stream: RngStream,
) -> Result<PhaseBox> {
    let dim = region.dim();
    let mut probes: Vec<Vec<f64>> = Vec::new();
    if dim <= 12 {
        for mask in 0..(1usize << dim) {
            probes.push(
                (0..dim)
                    .map(|k| if mask >> k & 1 == 1 { region.hi[k] } else { region.lo[k] })
                    .collect(),
            );
        }
    }
    let mut rng = stream.rng();
    probes.extend((0..options.probe_samples).map(|_| region.sample(&mut rng)));
    let images = probes
        .par_iter()
        .map(|x| flow.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for y in &images {
        for k in 0..dim {
            lo[k] = lo[k].min(y[k]);
            hi[k] = hi[k].max(y[k]);
        }
    }
    for k in 0..dim {
        let pad = options.margin * (hi[k] - lo[k]).max(1e-12);
        lo[k] -= pad;
        hi[k] += pad;
    }
    PhaseBox::new(lo, hi)
}

/// Volume check for a 1D harmonic oscillator over fractions of its period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiouvilleSpec {
    pub mass: f64,
    pub stiffness: f64,
    pub region: PhaseBox,
    pub period_fractions: Vec<f64>,
    pub n_samples: usize,
    pub dt: f64,
}

impl Default for LiouvilleSpec {
    fn default() -> Self {
        LiouvilleSpec {
            mass: 1.0,
            stiffness: 1.0,
            region: PhaseBox { lo: vec![0.5, -0.5], hi: vec![1.5, 0.5] },
            period_fractions: vec![0.25, 1.0],
            n_samples: 100_000,
            dt: 1e-2,
        }
    }
}

pub fn liouville_experiment(spec: &LiouvilleSpec, seed: u64) -> Result<ExperimentRun> {
    let system = HamiltonianSystem::harmonic_oscillator(1, spec.mass, spec.stiffness)?;
    let period = 2.0 * std::f64::consts::PI * (spec.mass / spec.stiffness).sqrt();
    let options = LiouvilleOptions { dt: spec.dt, n_samples: spec.n_samples, ..Default::default() };
    let root = RngStream::new(seed, 0);

    let mut report = ExperimentReport::new(
        "liouville-check",
        seed,
        serde_json::to_value(spec).expect("spec serializes"),
    );
    let mut table = DataTable::new(
        "volume_ratio",
        "stationarity of phase-space volume: lambda(Phi_t A) = lambda(A)",
        &["t", "ratio", "ratio_lo", "ratio_hi", "hits", "trials", "reference_fraction"],
    );
    let mut plot = Plot::new(
        "phase_images",
        "Phase-space region and its images under the oscillator flow",
        "q",
        "p",
    );
    let boundary = box_boundary(&spec.region, 100);
    plot.series.push(Series::new(
        "A",
        SeriesStyle::Points,
        boundary.iter().map(|x| (x[0], x[1])).collect(),
    ));

    for (i, frac) in spec.period_fractions.iter().enumerate() {
        let t = frac * period;
        let r = liouville_volume_check(&system, &spec.region, t, &options, root.child(i as u64))?;
        report.push(Metric::contains(
            format!("ratio_ci_contains_one[t={frac}T]"),
            r.ratio,
            [r.ratio_lo, r.ratio_hi],
            1.0,
        ));
        report.push(Metric::info(format!("ratio_halfwidth[t={frac}T]"), r.halfwidth()));
        table.push(vec![
            t,
            r.ratio,
            r.ratio_lo,
            r.ratio_hi,
            r.fraction.hits as f64,
            r.fraction.trials as f64,
            r.region_volume / r.reference_volume,
        ]);
        let steps = (t / spec.dt).ceil() as usize;
        let verlet = Verlet::new(if steps == 0 { spec.dt } else { t / steps as f64 })?;
        let flow = Flow { system: &system, verlet, steps };
        let image = boundary
            .iter()
            .map(|x| flow.forward(x).map(|y| (y[0], y[1])))
            .collect::<Result<Vec<_>>>()?;
        plot.series.push(Series::new(&format!("Φ_t A, t = {frac}T"), SeriesStyle::Points, image));
    }

    let mut run = ExperimentRun::new(report);
    run.add_table(table);
    run.plots.push(plot);
    Ok(run)
}

fn box_boundary(b: &PhaseBox, per_side: usize) -> Vec<Vec<f64>> {
    let (x0, x1, y0, y1) = (b.lo[0], b.hi[0], b.lo[1], b.hi[1]);
    let mut pts = Vec::new();
    for i in 0..per_side {
        let s = i as f64 / per_side as f64;
        pts.push(vec![x0 + s * (x1 - x0), y0]);
        pts.push(vec![x1, y0 + s * (y1 - y0)]);
        pts.push(vec![x1 - s * (x1 - x0), y1]);
        pts.push(vec![x0, y1 - s * (y1 - y0)]);
    }
    pts
}
