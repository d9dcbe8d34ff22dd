//! Fourier-transform baseline: the magnitude of the 2-D DFT over time and
//! antennas, indexed like the resonator grid.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::resonator::{magnitude, GridConfig, WeightMatrix};
use crate::signal::ChirpView;
use crate::{Error, Result};

/// Non-negative intensity per (range bin, angle bin), row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RangeAngleMap {
    n_range_bins: usize,
    n_angle_bins: usize,
    values: Vec<f64>,
}

impl RangeAngleMap {
    pub fn zeros(n_range_bins: usize, n_angle_bins: usize) -> Self {
        Self {
            n_range_bins,
            n_angle_bins,
            values: vec![0.0; n_range_bins * n_angle_bins],
        }
    }

    pub fn from_vec(n_range_bins: usize, n_angle_bins: usize, values: Vec<f64>) -> Result<Self> {
        let expected = n_range_bins * n_angle_bins;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            n_range_bins,
            n_angle_bins,
            values,
        })
    }

    pub fn n_range_bins(&self) -> usize {
        self.n_range_bins
    }

    pub fn n_angle_bins(&self) -> usize {
        self.n_angle_bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_range_bins, self.n_angle_bins)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, range_bin: usize, angle_bin: usize) -> f64 {
        self.values[range_bin * self.n_angle_bins + angle_bin]
    }

    pub fn set(&mut self, range_bin: usize, angle_bin: usize, v: f64) {
        self.values[range_bin * self.n_angle_bins + angle_bin] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Index of the largest cell (first one on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.n_angle_bins, best % self.n_angle_bins)
    }

    /// Element-wise mean of equally shaped maps.
    pub fn mean_of(maps: &[RangeAngleMap]) -> Result<Self> {
        let first = maps.first().ok_or(Error::Empty("map list"))?;
        let mut out = RangeAngleMap::zeros(first.n_range_bins, first.n_angle_bins);
        for m in maps {
            if m.shape() != first.shape() {
                return Err(Error::ShapeMismatch {
                    expected: first.shape(),
                    actual: m.shape(),
                });
            }
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += v;
            }
        }
        let n = maps.len() as f64;
        for o in &mut out.values {
            *o /= n;
        }
        Ok(out)
    }
}

/// Precomputed transform for one grid shape.
#[derive(Debug, Clone)]
pub struct FtBaseline {
    cfg: GridConfig,
    weights: WeightMatrix,
    twiddle: Vec<Complex64>,
}

impl FtBaseline {
    pub fn new(cfg: GridConfig, n_vx: usize) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_samples;
        let twiddle = (0..n).map(|k| Complex64::cis(-2.0 * PI * k as f64 / n as f64)).collect();
        Ok(Self {
            cfg,
            weights: WeightMatrix::new(cfg.n_angle_bins, n_vx),
            twiddle,
        })
    }

    /// Complex 2-D spectrum, `[n_range_bins][n_angle_bins]`.
    pub fn spectrum(&self, chirp: ChirpView<'_>) -> Result<Vec<Complex64>> {
        let cfg = &self.cfg;
        if chirp.n_samples() != cfg.n_samples || chirp.n_vx() != self.weights.n_vx() {
            return Err(Error::ShapeMismatch {
                expected: (cfg.n_samples, self.weights.n_vx()),
                actual: (chirp.n_samples(), chirp.n_vx()),
            });
        }
        let (n, a) = (cfg.n_samples, cfg.n_angle_bins);
        let mut y = vec![Complex64::new(0.0, 0.0); n * a];
        for k in 0..n {
            self.weights.project_into(chirp.sample(k), &mut y[k * a..(k + 1) * a]);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); cfg.n_range_bins * a];
        for j in 0..cfg.n_range_bins {
            let row = &mut out[j * a..(j + 1) * a];
            for k in 0..n {
                let tw = self.twiddle[(j * k) % n];
                for (o, y) in row.iter_mut().zip(&y[k * a..(k + 1) * a]) {
                    *o += tw * y;
                }
            }
        }
        Ok(out)
    }

    pub fn map(&self, chirp: ChirpView<'_>) -> Result<RangeAngleMap> {
        let values = self.spectrum(chirp)?.iter().map(|c| magnitude(*c)).collect();
        RangeAngleMap::from_vec(self.cfg.n_range_bins, self.cfg.n_angle_bins, values)
    }

    pub fn map_avg<'a>(&self, chirps: impl IntoIterator<Item = ChirpView<'a>>) -> Result<RangeAngleMap> {
        let maps = chirps.into_iter().map(|c| self.map(c)).collect::<Result<Vec<_>>>()?;
        if maps.is_empty() {
            return Err(Error::Empty("chirp list"));
        }
        RangeAngleMap::mean_of(&maps)
    }
}

/// Magnitude of the 2-D DFT of one chirp, truncated to `cfg.n_range_bins`.
pub fn ft_map(chirp: ChirpView<'_>, cfg: &GridConfig) -> Result<RangeAngleMap> {
    FtBaseline::new(*cfg, chirp.n_vx())?.map(chirp)
}

/// Element-wise mean of the per-chirp [`ft_map`] magnitudes.
pub fn ft_map_avg(chirps: &[ChirpView<'_>], cfg: &GridConfig) -> Result<RangeAngleMap> {
    let first = chirps.first().ok_or(Error::Empty("chirp list"))?;
    FtBaseline::new(*cfg, first.n_vx())?.map_avg(chirps.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ChirpFrame;

    #[test]
    fn zero_input_zero_map() {
        let frame = ChirpFrame::zeros(1, 32, 4);
        let m = ft_map(frame.chirp(0), &GridConfig::new(32, 4)).unwrap();
        assert!(m.values().iter().all(|v| *v == 0.0));
        assert_eq!(m.shape(), (16, 4));
    }

    #[test]
    fn matched_tone_peaks_at_its_bins() {
        let (n, vx) = (64, 8);
        let (j, l) = (9, 6);
        let amp = 0.3;
        let phi = crate::resonator::angle_bin_phase(l, vx);
        let mut data = Vec::new();
        for k in 0..n {
            for m in 0..vx {
                let ph = 2.0 * PI * (j * k) as f64 / n as f64 + m as f64 * phi;
                data.push(Complex64::cis(ph) * amp);
            }
        }
        let frame = ChirpFrame::from_vec(1, n, vx, data).unwrap();
        let map = ft_map(frame.chirp(0), &GridConfig::new(n, vx)).unwrap();
        assert_eq!(map.argmax(), (j, l));
        assert!((map.get(j, l) - (n * vx) as f64 * amp).abs() < 1e-9);
    }

    #[test]
    fn average_of_identical_chirps() {
        let mut frame = ChirpFrame::zeros(3, 16, 4);
        for (i, x) in frame.as_mut_slice().iter_mut().enumerate() {
            let k = i % 64;
            *x = Complex64::new((k as f64).sin(), ((k % 5) as f64).cos());
        }
        let cfg = GridConfig::new(16, 4);
        let one = ft_map(frame.chirp(0), &cfg).unwrap();
        let chirps: Vec<_> = frame.chirps().collect();
        assert_eq!(ft_map_avg(&chirps[..1], &cfg).unwrap(), one);
        let avg = ft_map_avg(&chirps, &cfg).unwrap();
        for (a, b) in avg.values().iter().zip(one.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert!(matches!(ft_map_avg(&[], &cfg), Err(Error::Empty(_))));
    }

    #[test]
    fn shape_mismatch() {
        let frame = ChirpFrame::zeros(1, 16, 4);
        assert!(matches!(
            ft_map(frame.chirp(0), &GridConfig::new(32, 4)),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
