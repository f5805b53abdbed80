use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use super::propagator::SplitStep;
use super::wavefunction::{Units, WaveFunction};
use crate::error::{config, Error, Result};
use crate::numerics::Grid;

const MAGIC: &[u8; 8] = b"PSIHIST1";

/// Wave-function frames on a uniform time grid: frame `k` is `Ψ` at
/// `t0 + k · frame_stride · dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiHistory {
    grid: Grid,
    units: Units,
    t0: f64,
    dt: f64,
    frame_stride: usize,
    frames: Vec<Vec<Complex64>>,
}

impl PsiHistory {
    /// Propagates a copy of `wf` with `prop`, storing `n_frames` frames
    /// (the first being `wf` itself) every `frame_stride` steps.
    pub fn record(wf: &WaveFunction, prop: &SplitStep, frame_stride: usize, n_frames: usize) -> Result<Self> {
        if frame_stride == 0 || n_frames == 0 {
            return config("need a positive frame stride and at least one frame");
        }
        let mut psi = wf.clone();
        let mut frames = Vec::with_capacity(n_frames);
        frames.push(psi.data().to_vec());
        for _ in 1..n_frames {
            prop.run(&mut psi, frame_stride)?;
            frames.push(psi.data().to_vec());
        }
        Ok(PsiHistory {
            grid: *wf.grid(),
            units: wf.units().clone(),
            t0: wf.time(),
            dt: prop.dt(),
            frame_stride,
            frames,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn units(&self) -> &Units {
        &self.units
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frame_stride(&self) -> usize {
        self.frame_stride
    }

    pub fn frame_interval(&self) -> f64 {
        self.dt * self.frame_stride as f64
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, k: usize) -> &[Complex64] {
        &self.frames[k]
    }

    pub fn frame_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.frame_interval()
    }

    pub fn t_end(&self) -> f64 {
        self.frame_time(self.frames.len() - 1)
    }

    /// Frame `k` as a wave function (free Hamiltonian; the potential is not
    /// stored).
    pub fn wave_function(&self, k: usize) -> Result<WaveFunction> {
        let field = crate::numerics::ComplexField::new(self.grid, self.frames[k].clone())?;
        Ok(WaveFunction::free(field, self.units.clone())?.at_time(self.frame_time(k)))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(self.grid.dims() as u32)?;
        let n = self.grid.points() as u64;
        w.write_u64::<LittleEndian>(n)?;
        w.write_u64::<LittleEndian>(if self.grid.dims() == 2 { n } else { 1 })?;
        w.write_f64::<LittleEndian>(self.grid.length())?;
        w.write_f64::<LittleEndian>(self.dt)?;
        w.write_u64::<LittleEndian>(self.frame_stride as u64)?;
        w.write_f64::<LittleEndian>(self.units.hbar)?;
        w.write_u32::<LittleEndian>(self.units.masses.len() as u32)?;
        for m in &self.units.masses {
            w.write_f64::<LittleEndian>(*m)?;
        }
        w.write_f64::<LittleEndian>(self.t0)?;
        let label = self.units.label.as_bytes();
        w.write_u32::<LittleEndian>(label.len() as u32)?;
        w.write_all(label)?;
        w.write_u64::<LittleEndian>(self.frames.len() as u64)?;
        for frame in &self.frames {
            for z in frame {
                w.write_f64::<LittleEndian>(z.re)?;
                w.write_f64::<LittleEndian>(z.im)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a wave-function history file".into()));
        }
        let dims = r.read_u32::<LittleEndian>()? as usize;
        let nx = r.read_u64::<LittleEndian>()? as usize;
        let ny = r.read_u64::<LittleEndian>()? as usize;
        if !(dims == 1 && ny == 1 || dims == 2 && ny == nx) {
            return Err(Error::Format(format!("unsupported grid shape {dims}D {nx}x{ny}")));
        }
        let length = r.read_f64::<LittleEndian>()?;
        let grid = Grid::new(dims, nx, length).map_err(|e| Error::Format(e.to_string()))?;
        let dt = r.read_f64::<LittleEndian>()?;
        let frame_stride = r.read_u64::<LittleEndian>()? as usize;
        let hbar = r.read_f64::<LittleEndian>()?;
        let n_masses = r.read_u32::<LittleEndian>()? as usize;
        if n_masses > 2 {
            return Err(Error::Format("too many masses".into()));
        }
        let masses = (0..n_masses).map(|_| r.read_f64::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
        let t0 = r.read_f64::<LittleEndian>()?;
        let label_len = r.read_u32::<LittleEndian>()? as usize;
        if label_len > 4096 {
            return Err(Error::Format("unit label too long".into()));
        }
        let mut label = vec![0u8; label_len];
        r.read_exact(&mut label)?;
        let label = String::from_utf8(label).map_err(|_| Error::Format("unit label is not UTF-8".into()))?;
        let units = Units { hbar, masses, label };
        units.validate(dims).map_err(|e| Error::Format(e.to_string()))?;
        let n_frames = r.read_u64::<LittleEndian>()? as usize;
        let total = grid.total_points();
        let mut frames = Vec::with_capacity(n_frames.min(1 << 16));
        for _ in 0..n_frames {
            let mut frame = Vec::with_capacity(total);
            for _ in 0..total {
                let re = r.read_f64::<LittleEndian>()?;
                let im = r.read_f64::<LittleEndian>()?;
                frame.push(Complex64::new(re, im));
            }
            frames.push(frame);
        }
        if frames.is_empty() || !(dt > 0.0) || frame_stride == 0 {
            return Err(Error::Format("history needs frames, dt > 0 and a positive stride".into()));
        }
        Ok(PsiHistory { grid, units, t0, dt, frame_stride, frames })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohm::states::harmonic_superposition;

    fn sample_history() -> PsiHistory {
        let g = Grid::one_d(64, 16.0).unwrap();
        let c = Complex64::new(1.0, 0.0);
        let units = Units { hbar: 1.0, masses: vec![1.0], label: "test units".into() };
        let wf = harmonic_superposition(&g, &units, 1.0, &[(0, c), (1, c)]).unwrap();
        let prop = SplitStep::new(&wf, 0.01).unwrap();
        PsiHistory::record(&wf, &prop, 5, 7).unwrap()
    }

    #[test]
    fn frame_times() {
        let h = sample_history();
        assert_eq!(h.len(), 7);
        assert!((h.t_end() - 0.3).abs() < 1e-12);
        assert!((h.wave_function(6).unwrap().time() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let h = sample_history();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("psi.bin");
        h.save(&path).unwrap();
        let back = PsiHistory::load(&path).unwrap();
        assert_eq!(back, h);
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        assert!(size > 7 * 64 * 16);
    }

    #[test]
    fn frames_are_little_endian_pairs_at_the_end() {
        let h = sample_history();
        let mut buf = Vec::new();
        h.write_to(&mut buf).unwrap();
        let last = h.frame(6)[63];
        let tail = &buf[buf.len() - 16..];
        assert_eq!(f64::from_le_bytes(tail[..8].try_into().unwrap()), last.re);
        assert_eq!(f64::from_le_bytes(tail[8..].try_into().unwrap()), last.im);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(PsiHistory::read_from(&b"NOTAHIST0000"[..]), Err(Error::Format(_))));
        let mut buf = Vec::new();
        sample_history().write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(PsiHistory::read_from(&buf[..]).is_err());
    }
}
