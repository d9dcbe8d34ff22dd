//! Cell-averaging CFAR on range–angle maps.
//!
//! A cell is a hit when its value exceeds `α·(mean(neighbours) + o)`. The
//! neighbourhood is a 3 (range) × 5 (angle) window around the cell under
//! test, without guard cells and without the cell itself. At the map edges
//! the window is truncated and the mean taken over the cells that remain.

use alloc::vec::Vec;

use crate::dft::RangeAngleMap;
use crate::{Error, Result};

/// Window extent along range.
pub const WINDOW_RANGE: usize = 3;
/// Window extent along angle.
pub const WINDOW_ANGLE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CfarConfig {
    /// Threshold scale α.
    pub alpha: f64,
    /// Additive offset o.
    pub offset: f64,
}

impl CfarConfig {
    pub fn new(alpha: f64, offset: f64) -> Result<Self> {
        let cfg = Self { alpha, offset };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("cfar_alpha", "must be positive"));
        }
        if !self.offset.is_finite() {
            return Err(Error::invalid("cfar_offset", "must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn threshold(&self, neighbour_mean: f64) -> f64 {
        self.alpha * (neighbour_mean + self.offset)
    }
}

/// Binary classification map with the shape of its source map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionMap {
    n_range_bins: usize,
    n_angle_bins: usize,
    hits: Vec<bool>,
}

impl DetectionMap {
    pub fn from_vec(n_range_bins: usize, n_angle_bins: usize, hits: Vec<bool>) -> Result<Self> {
        if hits.len() != n_range_bins * n_angle_bins {
            return Err(Error::LengthMismatch {
                expected: n_range_bins * n_angle_bins,
                actual: hits.len(),
            });
        }
        Ok(Self {
            n_range_bins,
            n_angle_bins,
            hits,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_range_bins, self.n_angle_bins)
    }

    pub fn get(&self, range_bin: usize, angle_bin: usize) -> bool {
        self.hits[range_bin * self.n_angle_bins + angle_bin]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.hits
    }

    pub fn count(&self) -> usize {
        self.hits.iter().filter(|h| **h).count()
    }

    /// Hit coordinates in row-major order.
    pub fn hit_bins(&self) -> Vec<(usize, usize)> {
        self.hits
            .iter()
            .enumerate()
            .filter(|(_, h)| **h)
            .map(|(i, _)| (i / self.n_angle_bins, i % self.n_angle_bins))
            .collect()
    }
}

fn check_shape(map: &RangeAngleMap) -> Result<()> {
    let (rows, cols) = map.shape();
    if rows < WINDOW_RANGE || cols < WINDOW_ANGLE {
        return Err(Error::MapTooSmall {
            rows,
            cols,
            win_rows: WINDOW_RANGE,
            win_cols: WINDOW_ANGLE,
        });
    }
    Ok(())
}

/// Mean of the (truncated) neighbourhood of every cell, excluding the cell.
///
/// Independent of the CFAR parameters, so a parameter sweep computes it once.
pub fn neighbour_means(map: &RangeAngleMap) -> Result<Vec<f64>> {
    check_shape(map)?;
    let (rows, cols) = map.shape();
    let (hr, ha) = (WINDOW_RANGE / 2, WINDOW_ANGLE / 2);
    let v = map.values();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let (r0, r1) = (i.saturating_sub(hr), (i + hr).min(rows - 1));
        for j in 0..cols {
            let (c0, c1) = (j.saturating_sub(ha), (j + ha).min(cols - 1));
            let mut sum = 0.0;
            for r in r0..=r1 {
                for c in c0..=c1 {
                    if r != i || c != j {
                        sum += v[r * cols + c];
                    }
                }
            }
            let count = (r1 - r0 + 1) * (c1 - c0 + 1) - 1;
            out.push(sum / count as f64);
        }
    }
    Ok(out)
}

/// Threshold `map` against precomputed [`neighbour_means`].
pub fn detect_with_means(map: &RangeAngleMap, means: &[f64], cfg: &CfarConfig) -> DetectionMap {
    let hits = map
        .values()
        .iter()
        .zip(means)
        .map(|(v, m)| *v > cfg.threshold(*m))
        .collect();
    let (rows, cols) = map.shape();
    DetectionMap {
        n_range_bins: rows,
        n_angle_bins: cols,
        hits,
    }
}

pub fn ca_cfar(map: &RangeAngleMap, cfg: &CfarConfig) -> Result<DetectionMap> {
    cfg.validate()?;
    let means = neighbour_means(map)?;
    Ok(detect_with_means(map, &means, cfg))
}
