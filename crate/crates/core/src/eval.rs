//! Ground-truth labels, detection scoring and the adjusted SNR.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::cfar::{ca_cfar, DetectionMap};
use crate::dft::RangeAngleMap;
use crate::pipeline::{Executor, ModelKind, ModelSpec};
use crate::resonator::{ChirpMode, Grid, GridConfig};
use crate::signal::{ChirpFrame, Scene};
use crate::{Error, Result};

/// Default Chebyshev match radius in bins.
pub const DEFAULT_MATCH_RADIUS: usize = 1;

/// Fractional positions within this distance below a half are rounded up.
const TIE_EPS: f64 = 1e-9;

/// Ground-truth (range bin, angle bin) of each target, in target order.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinLabel {
    pub bins: Vec<(usize, usize)>,
}

impl BinLabel {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Bin of every target: nearest range bin and nearest steering phase
/// (circularly), halves rounded up.
pub fn label_bins(scene: &Scene, grid: &GridConfig) -> Result<BinLabel> {
    let p = &scene.params;
    let n_angle = grid.n_angle_bins as f64;
    let mut bins = Vec::with_capacity(scene.targets.len());
    for (index, t) in scene.targets.iter().enumerate() {
        let pos = p.beat_phase_per_sample(t.range_m) / (2.0 * PI / grid.n_samples as f64);
        let range_bin = Float::floor(pos + 0.5 + TIE_EPS);
        if !(range_bin >= 0.0 && (range_bin as usize) < grid.n_range_bins) {
            return Err(Error::OutOfField { index });
        }
        if !(Float::abs(t.azimuth_rad) <= PI / 2.0) {
            return Err(Error::OutOfField { index });
        }
        let phi = p.antenna_phase(t.azimuth_rad);
        let apos = (phi + PI) / (2.0 * PI) * n_angle;
        let angle_bin = Float::floor(apos + 0.5 + TIE_EPS) as i64;
        let angle_bin = angle_bin.rem_euclid(grid.n_angle_bins as i64) as usize;
        bins.push((range_bin as usize, angle_bin));
    }
    Ok(BinLabel { bins })
}

/// Confusion counts of one detection map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f_score(&self) -> f64 {
        f_score(self.precision(), self.recall())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

/// Greedy one-to-one matching of hits to labels.
///
/// Labels are visited in ascending bin order; each takes the closest
/// unmatched hit within `radius` (Chebyshev), ties going to the lowest hit
/// index. Unmatched hits are false positives, unmatched labels false
/// negatives.
pub fn score(det: &DetectionMap, labels: &BinLabel, radius: usize) -> Counts {
    let hits = det.hit_bins();
    let mut used = alloc::vec![false; hits.len()];
    let mut order: Vec<(usize, usize)> = labels.bins.clone();
    order.sort_unstable();
    let mut tp = 0;
    for label in order {
        let best = hits
            .iter()
            .enumerate()
            .filter(|(i, h)| !used[*i] && chebyshev(**h, label) <= radius)
            .min_by_key(|(i, h)| (chebyshev(**h, label), *i))
            .map(|(i, _)| i);
        if let Some(i) = best {
            used[i] = true;
            tp += 1;
        }
    }
    Counts {
        tp,
        fp: hits.len() - tp,
        fn_: labels.len() - tp,
    }
}

/// Mean over targets of `value_at_target / Σ map`; 0 for an all-zero map.
pub fn snr_adjusted(map: &RangeAngleMap, labels: &BinLabel) -> f64 {
    let total = map.sum();
    if !(total > 0.0) || labels.is_empty() {
        return 0.0;
    }
    let sum: f64 = labels.bins.iter().map(|&(r, a)| map.get(r, a) / total).sum();
    sum / labels.len() as f64
}

/// Result of one scene (one evaluated map).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneScore {
    pub counts: Counts,
    pub n_labels: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub snr: f64,
    /// Mean spikes per processed chirp.
    pub spikes: f64,
}

impl SceneScore {
    pub fn new(counts: Counts, n_labels: usize, snr: f64, spikes: f64) -> Self {
        Self {
            counts,
            n_labels,
            precision: counts.precision(),
            recall: counts.recall(),
            f_score: counts.f_score(),
            snr,
            spikes,
        }
    }
}

/// Scene-averaged detection quality and spike accounting.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub snr: f64,
    /// Mean spike events per processed chirp.
    pub spike_count: f64,
    /// Spike bits (one bit per event) over the bits of a float32 map.
    pub bandwidth_ratio: f64,
    pub scenes: Vec<SceneScore>,
}

impl EvalReport {
    /// Average precision, recall, SNR and spikes over scenes with equal
    /// weight; the F-score is the harmonic mean of the averages.
    pub fn aggregate(scenes: Vec<SceneScore>, map_bits: f64) -> Self {
        if scenes.is_empty() {
            return Self::default();
        }
        let n = scenes.len() as f64;
        let mean = |f: fn(&SceneScore) -> f64| scenes.iter().map(f).sum::<f64>() / n;
        let precision = mean(|s| s.precision);
        let recall = mean(|s| s.recall);
        let spike_count = mean(|s| s.spikes);
        Self {
            f_score: f_score(precision, recall),
            precision,
            recall,
            snr: mean(|s| s.snr),
            spike_count,
            bandwidth_ratio: if map_bits > 0.0 { spike_count / map_bits } else { 0.0 },
            scenes,
        }
    }
}

/// Bits of a float32 map of the given grid.
pub fn float32_map_bits(grid: &GridConfig) -> f64 {
    (grid.n_neurons() * 32) as f64
}

/// Detection quality after the first `sample` samples of a chirp.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Checkpoint {
    pub sample: usize,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl Checkpoint {
    fn new(sample: usize, counts: Counts) -> Self {
        Self {
            sample,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f_score: counts.f_score(),
        }
    }
}

/// Score the first chirp of `frame` every `stride` samples.
///
/// At each checkpoint the grid is read out as it stands (accumulated spikes
/// for the spiking models, `max(g, 0)` for the gradient model), passed
/// through the model's detector and matched against `labels`.
pub fn early_detection_curve<E: Executor + ?Sized>(
    frame: &ChirpFrame,
    spec: &ModelSpec,
    labels: &BinLabel,
    stride: usize,
    radius: usize,
    exec: &E,
) -> Result<Vec<Checkpoint>> {
    spec.validate()?;
    if spec.kind == ModelKind::Ft {
        return Err(Error::Unsupported {
            model: "ft",
            what: "early detection",
        });
    }
    if frame.n_chirps() == 0 {
        return Err(Error::Empty("frame"));
    }
    let n = frame.n_samples();
    if stride == 0 || n % stride != 0 {
        return Err(Error::invalid("stride", "must divide the number of samples"));
    }
    let mut grid = Grid::new(spec.grid_config(n, frame.n_vx()), frame.n_vx(), spec.codec)?;
    grid.begin_chirp(0, ChirpMode::Reset);
    let mut sink = Vec::new();
    let mut out = Vec::with_capacity(n / stride);
    for start in (0..n).step_by(stride) {
        let proj = grid.project(frame.chirp(0), start..start + stride)?;
        exec.feed(&mut grid, &proj, &mut sink)?;
        let det = ca_cfar(&grid.readout_map(), &spec.cfar)?;
        out.push(Checkpoint::new(start + stride, score(&det, labels, radius)));
    }
    Ok(out)
}

/// Divide precision, recall and F-score by their values at the last
/// checkpoint (0 where the final value is 0).
pub fn normalize_curve(points: &[Checkpoint]) -> Vec<(f64, f64, f64)> {
    let Some(last) = points.last() else {
        return Vec::new();
    };
    let div = |v: f64, d: f64| if d > 0.0 { v / d } else { 0.0 };
    points
        .iter()
        .map(|p| {
            (
                div(p.precision, last.precision),
                div(p.recall, last.recall),
                div(p.f_score, last.f_score),
            )
        })
        .collect()
}
