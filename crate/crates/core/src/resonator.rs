//! The resonator grid: one neuron per (range bin, angle bin).
//!
//! Each sample the antenna vector is projected onto the neuron's complex
//! weight row (angle), fed into a discrete resonate-and-fire oscillator
//! (range), and the oscillator magnitude is tracked through an envelope and
//! an exponentially filtered gradient. A codec then turns the tracked
//! quantities into spikes.
//!
//! Per sample and neuron the update order is
//! `rf_step → envelope_update → gradient_update → codec`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use num_complex::Complex64;
use num_traits::Float;

use crate::codec::{self, CodecConfig, CodecState, Emission, Polarity, SpikeEvent};
use crate::dft::RangeAngleMap;
use crate::signal::ChirpView;
use crate::{Error, Result};

/// Shape and filter coefficients of the neuron grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridConfig {
    pub n_range_bins: usize,
    pub n_angle_bins: usize,
    pub n_samples: usize,
    /// Gradient smoothing, `0 < α_g ≤ 1`.
    pub alpha_g: f64,
    /// Magnitude smoothing ahead of the envelope, `0 < α_x ≤ 1`; 1 disables it.
    pub alpha_x: f64,
}

impl GridConfig {
    /// Positive-frequency half of the range spectrum, one angle bin per
    /// antenna, `α_g = 0.001`, smoothing disabled.
    pub fn new(n_samples: usize, n_vx: usize) -> Self {
        Self {
            n_range_bins: n_samples / 2,
            n_angle_bins: n_vx,
            n_samples,
            alpha_g: 0.001,
            alpha_x: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_angle_bins == 0 || self.n_range_bins == 0 {
            return Err(Error::invalid("grid", "all dimensions must be at least 1"));
        }
        if self.n_range_bins > self.n_samples {
            return Err(Error::invalid("n_range_bins", "must not exceed n_samples"));
        }
        if self.n_range_bins > u16::MAX as usize || self.n_angle_bins > u16::MAX as usize {
            return Err(Error::invalid("grid", "bin indices must fit in 16 bits"));
        }
        if !(self.alpha_g > 0.0 && self.alpha_g <= 1.0) {
            return Err(Error::invalid("alpha_g", "must lie in (0, 1]"));
        }
        if !(self.alpha_x > 0.0 && self.alpha_x <= 1.0) {
            return Err(Error::invalid("alpha_x", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn n_neurons(&self) -> usize {
        self.n_range_bins * self.n_angle_bins
    }

    /// Per-sample rotation `Δω_j` of range bin `j`.
    pub fn range_bin_step(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_samples as f64
    }
}

/// Steering phase `φ_l` of angle bin `l`, uniformly covering `[−π, π)`.
pub fn angle_bin_phase(l: usize, n_angle_bins: usize) -> f64 {
    -PI + 2.0 * PI * l as f64 / n_angle_bins as f64
}

/// Azimuth of angle bin `l` for an array with the given element spacing.
pub fn angle_bin_azimuth(l: usize, n_angle_bins: usize, spacing_wavelengths: f64) -> f64 {
    let s = angle_bin_phase(l, n_angle_bins) / (2.0 * PI * spacing_wavelengths);
    Float::asin(s.clamp(-1.0, 1.0))
}

/// Complex dendritic weights `W_lm = e^{−i m φ_l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n_angle_bins: usize,
    n_vx: usize,
    w: Vec<Complex64>,
}

impl WeightMatrix {
    pub fn new(n_angle_bins: usize, n_vx: usize) -> Self {
        let mut w = Vec::with_capacity(n_angle_bins * n_vx);
        for l in 0..n_angle_bins {
            let phi = angle_bin_phase(l, n_angle_bins);
            w.extend((0..n_vx).map(|m| Complex64::cis(-(m as f64) * phi)));
        }
        Self { n_angle_bins, n_vx, w }
    }

    pub fn n_angle_bins(&self) -> usize {
        self.n_angle_bins
    }

    pub fn n_vx(&self) -> usize {
        self.n_vx
    }

    pub fn row(&self, l: usize) -> &[Complex64] {
        &self.w[l * self.n_vx..(l + 1) * self.n_vx]
    }

    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.w[l * self.n_vx + m]
    }

    /// Project one antenna vector onto every weight row.
    pub fn project_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n_vx);
        for (l, y) in out.iter_mut().enumerate() {
            *y = dot(self.row(l), x);
        }
    }
}

#[inline]
fn dot(w: &[Complex64], x: &[Complex64]) -> Complex64 {
    w.iter().zip(x).fold(Complex64::new(0.0, 0.0), |acc, (w, x)| acc + w * x)
}

/// `y_l = Σ_m W_lm·x_m` for one weight row.
pub fn dendritic_project(x: &[Complex64], w_l: &[Complex64]) -> Result<Complex64> {
    if x.len() != w_l.len() {
        return Err(Error::LengthMismatch {
            expected: w_l.len(),
            actual: x.len(),
        });
    }
    Ok(dot(w_l, x))
}

/// Per-range-bin rotation factors `e^{iΔω_j}`, `Δω_j = 2πj/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationTable {
    rot: Vec<Complex64>,
}

impl RotationTable {
    pub fn new(n_range_bins: usize, n_samples: usize) -> Self {
        let rot = (0..n_range_bins)
            .map(|j| Complex64::cis(2.0 * PI * j as f64 / n_samples as f64))
            .collect();
        Self { rot }
    }

    pub fn get(&self, j: usize) -> Complex64 {
        self.rot[j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.rot
    }
}

/// `‖c‖` without the overflow guard of `hypot`.
#[inline]
pub fn magnitude(c: Complex64) -> f64 {
    Float::sqrt(c.norm_sqr())
}

/// Discrete resonate-and-fire update without decay: `s' = e^{iΔω_j}·s + y`.
#[inline]
pub fn rf_step(s: Complex64, y: Complex64, rot: Complex64) -> Complex64 {
    rot * s + y
}

/// Closed-form continuous state of a resonator with eigenfrequency
/// `omega_j` (rad/s) started at `s(0) = 0` and driven by
/// `Σ_k c_k·e^{iω_k t}`, where each `(c_k, ω_k)` pair carries `c_k = a_k·β_kl`.
///
/// Exactly matched components use the `Δω → 0` limit `c_k·t·e^{iω_j t}`.
pub fn analytic_state(t: f64, components: &[(Complex64, f64)], omega_j: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let carrier = Complex64::cis(omega_j * t);
    components.iter().fold(Complex64::new(0.0, 0.0), |acc, &(c, omega_k)| {
        let d = omega_j - omega_k;
        let term = if d == 0.0 {
            c * t * carrier
        } else {
            i * c * carrier * (Complex64::cis(-d * t) - 1.0) / d
        };
        acc + term
    })
}

/// What happens to the gradient estimate at a chirp boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ChirpMode {
    /// Every chirp starts from `g = 0`.
    Reset,
    /// `g` carries over from the end of the previous chirp.
    Continuous,
}

/// Increments of the tracked maxima in one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvelopeDelta {
    pub d_s_max: f64,
    pub d_w_max: f64,
}

impl EnvelopeDelta {
    /// `ΔΛ = Δs_max − Δw_max`.
    pub fn d_lambda(&self) -> f64 {
        self.d_s_max - self.d_w_max
    }
}

/// State of one resonator neuron (without its codec).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeuronState {
    /// Complex oscillator state.
    pub s: Complex64,
    /// Magnitude fed to the envelope (`‖s‖`, optionally smoothed).
    pub mag: f64,
    pub s_max: f64,
    pub w_max: f64,
    /// Gradient estimate of the envelope.
    pub g: f64,
}

impl NeuronState {
    pub fn begin_chirp(&mut self, mode: ChirpMode) {
        let g = match mode {
            ChirpMode::Reset => 0.0,
            ChirpMode::Continuous => self.g,
        };
        *self = NeuronState { g, ..Default::default() };
    }

    #[inline]
    pub fn rf_step(&mut self, y: Complex64, rot: Complex64) {
        self.s = rf_step(self.s, y, rot);
    }

    /// Update `s_max`, `w_max` from the current `‖s‖` and return the increments.
    #[inline]
    pub fn envelope_update(&mut self, alpha_x: f64) -> EnvelopeDelta {
        let raw = magnitude(self.s);
        self.mag = if alpha_x == 1.0 {
            raw
        } else {
            (1.0 - alpha_x) * self.mag + alpha_x * raw
        };
        let mut d = EnvelopeDelta::default();
        if self.mag > self.s_max {
            d.d_s_max = self.mag - self.s_max;
            self.s_max = self.mag;
        }
        let width = self.s_max - self.mag;
        if width > self.w_max {
            d.d_w_max = width - self.w_max;
            self.w_max = width;
        }
        d
    }

    /// Exponential filter `g ← (1 − α_g)·g + α_g·ΔΛ`.
    #[inline]
    pub fn gradient_update(&mut self, d_lambda: f64, alpha_g: f64) {
        self.g = (1.0 - alpha_g) * self.g + alpha_g * d_lambda;
    }

    /// Envelope `Λ = s_max − w_max`.
    pub fn lambda(&self) -> f64 {
        self.s_max - self.w_max
    }

    /// Full per-sample update without the codec.
    #[inline]
    pub fn step(&mut self, y: Complex64, rot: Complex64, alpha_x: f64, alpha_g: f64) {
        self.rf_step(y, rot);
        let d = self.envelope_update(alpha_x);
        self.gradient_update(d.d_lambda(), alpha_g);
    }
}

/// Dendritic projections `y_l` for a run of consecutive samples of one chirp.
#[derive(Debug, Clone)]
pub struct Projection {
    first_sample: usize,
    n_angle_bins: usize,
    y: Vec<Complex64>,
}

impl Projection {
    pub fn new(weights: &WeightMatrix, chirp: ChirpView<'_>, samples: Range<usize>) -> Result<Self> {
        if chirp.n_vx() != weights.n_vx() {
            return Err(Error::LengthMismatch {
                expected: weights.n_vx(),
                actual: chirp.n_vx(),
            });
        }
        if samples.end > chirp.n_samples() || samples.start > samples.end {
            return Err(Error::invalid("samples", "range outside the chirp"));
        }
        let n_angle_bins = weights.n_angle_bins();
        let mut y = vec![Complex64::new(0.0, 0.0); samples.len() * n_angle_bins];
        for (k, n) in samples.clone().enumerate() {
            weights.project_into(chirp.sample(n), &mut y[k * n_angle_bins..(k + 1) * n_angle_bins]);
        }
        Ok(Self {
            first_sample: samples.start,
            n_angle_bins,
            y,
        })
    }

    pub fn first_sample(&self) -> usize {
        self.first_sample
    }

    pub fn len(&self) -> usize {
        self.y.len() / self.n_angle_bins
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn samples(&self) -> Range<usize> {
        self.first_sample..self.first_sample + self.len()
    }

    /// `y_l` for every angle bin at the `k`-th projected sample.
    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.y[k * self.n_angle_bins..(k + 1) * self.n_angle_bins]
    }
}

/// Immutable part of a grid, shared by every worker.
#[derive(Debug, Clone)]
pub struct Kernel {
    cfg: GridConfig,
    weights: WeightMatrix,
    rot: RotationTable,
    codec: CodecConfig,
}

impl Kernel {
    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn rotations(&self) -> &RotationTable {
        &self.rot
    }

    pub fn codec(&self) -> &CodecConfig {
        &self.codec
    }

    /// Advance every neuron of `block` through the projected samples,
    /// appending spikes to `sink` in row-major neuron order.
    pub fn run_block(&self, block: RowBlock<'_>, proj: &Projection, chirp: u32, sink: &mut Vec<SpikeEvent>) {
        match self.codec {
            CodecConfig::None => self.run_with(block, proj, chirp, sink, |_, _, _| Emission::NONE),
            CodecConfig::Adaptive { .. } => self.run_with(block, proj, chirp, sink, |st, n, _| match st {
                CodecState::Adaptive(a) => codec::adaptive_step(a, n.s_max, n.w_max),
                _ => unreachable!("codec state does not match adaptive codec"),
            }),
            CodecConfig::Rate(p) => self.run_with(block, proj, chirp, sink, |st, n, sample| match st {
                CodecState::Lif(l) => Emission {
                    positive: codec::rate_lif_step(l, n.g, &p, sample) as u32,
                    negative: 0,
                },
                _ => unreachable!("codec state does not match LIF codec"),
            }),
            CodecConfig::Time(p) => self.run_with(block, proj, chirp, sink, |st, n, sample| match st {
                CodecState::Lif(l) => Emission {
                    positive: codec::time_lif_step(l, n.g, &p, sample) as u32,
                    negative: 0,
                },
                _ => unreachable!("codec state does not match LIF codec"),
            }),
        }
    }

    #[inline(always)]
    fn run_with<F>(&self, block: RowBlock<'_>, proj: &Projection, chirp: u32, sink: &mut Vec<SpikeEvent>, mut spike: F)
    where
        F: FnMut(&mut CodecState, &NeuronState, u32) -> Emission,
    {
        let n_angle = self.cfg.n_angle_bins;
        let (alpha_x, alpha_g) = (self.cfg.alpha_x, self.cfg.alpha_g);
        let rows = block.neurons.chunks_exact_mut(n_angle).zip(block.codec.chunks_exact_mut(n_angle));
        for (r, (neurons, codecs)) in rows.enumerate() {
            let j = block.first_row + r;
            let rot = self.rot.get(j);
            for k in 0..proj.len() {
                let sample = (proj.first_sample + k) as u32;
                let y = proj.row(k);
                for (l, ((n, c), &y)) in neurons.iter_mut().zip(codecs.iter_mut()).zip(y).enumerate() {
                    n.step(y, rot, alpha_x, alpha_g);
                    let e = spike(c, n, sample);
                    if !e.is_empty() {
                        emit(sink, e, chirp, sample, j as u16, l as u16);
                    }
                }
            }
        }
    }

    fn readout(&self, n: &NeuronState, c: &CodecState) -> f64 {
        match c {
            CodecState::None => n.g.max(0.0),
            CodecState::Adaptive(a) => a.readout().max(0.0),
            CodecState::Lif(l) => match self.codec {
                CodecConfig::Time(_) => codec::decode_time(l.first_spike, self.cfg.n_samples),
                _ => codec::decode_rate(l.n_spikes),
            },
        }
    }
}

#[cold]
fn emit(sink: &mut Vec<SpikeEvent>, e: Emission, chirp: u32, sample: u32, range_bin: u16, angle_bin: u16) {
    let ev = |polarity| SpikeEvent {
        chirp,
        sample,
        range_bin,
        angle_bin,
        polarity,
    };
    sink.extend((0..e.positive).map(|_| ev(Polarity::Positive)));
    sink.extend((0..e.negative).map(|_| ev(Polarity::Negative)));
}

/// A contiguous run of range rows, handed to one worker.
#[derive(Debug)]
pub struct RowBlock<'a> {
    pub first_row: usize,
    pub neurons: &'a mut [NeuronState],
    pub codec: &'a mut [CodecState],
}

/// The full `[n_range_bins][n_angle_bins]` neuron grid.
#[derive(Debug, Clone)]
pub struct Grid {
    kernel: Kernel,
    neurons: Vec<NeuronState>,
    codec: Vec<CodecState>,
    chirp: u32,
    cursor: usize,
}

impl Grid {
    pub fn new(cfg: GridConfig, n_vx: usize, codec: CodecConfig) -> Result<Self> {
        cfg.validate()?;
        codec.validate()?;
        if n_vx == 0 {
            return Err(Error::invalid("n_vx", "must be at least 1"));
        }
        let n = cfg.n_neurons();
        Ok(Self {
            kernel: Kernel {
                cfg,
                weights: WeightMatrix::new(cfg.n_angle_bins, n_vx),
                rot: RotationTable::new(cfg.n_range_bins, cfg.n_samples),
                codec,
            },
            neurons: vec![NeuronState::default(); n],
            codec: vec![codec.initial_state(); n],
            chirp: 0,
            cursor: 0,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.kernel.cfg
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    pub fn neuron(&self, range_bin: usize, angle_bin: usize) -> &NeuronState {
        &self.neurons[range_bin * self.kernel.cfg.n_angle_bins + angle_bin]
    }

    pub fn codec_states(&self) -> &[CodecState] {
        &self.codec
    }

    /// Sample index the next fed sample must have.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn current_chirp(&self) -> u32 {
        self.chirp
    }

    /// Reset `s`, `s_max`, `w_max` and the codecs; `g` only in reset mode.
    pub fn begin_chirp(&mut self, chirp: u32, mode: ChirpMode) {
        for n in &mut self.neurons {
            n.begin_chirp(mode);
        }
        for c in &mut self.codec {
            c.reset();
        }
        self.chirp = chirp;
        self.cursor = 0;
    }

    pub fn project(&self, chirp: ChirpView<'_>, samples: Range<usize>) -> Result<Projection> {
        self.check_chirp(chirp)?;
        Projection::new(&self.kernel.weights, chirp, samples)
    }

    fn check_chirp(&self, chirp: ChirpView<'_>) -> Result<()> {
        let cfg = &self.kernel.cfg;
        if chirp.n_samples() != cfg.n_samples || chirp.n_vx() != self.kernel.weights.n_vx() {
            return Err(Error::ShapeMismatch {
                expected: (cfg.n_samples, self.kernel.weights.n_vx()),
                actual: (chirp.n_samples(), chirp.n_vx()),
            });
        }
        Ok(())
    }

    /// Check that `proj` continues exactly where the grid stopped.
    pub fn check_projection(&self, proj: &Projection) -> Result<()> {
        if proj.first_sample != self.cursor || proj.samples().end > self.kernel.cfg.n_samples {
            return Err(Error::invalid("projection", "samples must continue where the grid stopped"));
        }
        Ok(())
    }

    /// Split the mutable neuron state into blocks of `rows_per_block` range rows.
    pub fn split(&mut self, rows_per_block: usize) -> (&Kernel, Vec<RowBlock<'_>>) {
        let per = rows_per_block.max(1) * self.kernel.cfg.n_angle_bins;
        let blocks = self
            .neurons
            .chunks_mut(per)
            .zip(self.codec.chunks_mut(per))
            .enumerate()
            .map(|(i, (neurons, codec))| RowBlock {
                first_row: i * rows_per_block.max(1),
                neurons,
                codec,
            })
            .collect();
        (&self.kernel, blocks)
    }

    /// Feed projected samples to every neuron. Spikes are appended to `sink`
    /// in `(chirp, sample, range_bin, angle_bin)` order.
    pub fn feed(&mut self, proj: &Projection, sink: &mut Vec<SpikeEvent>) -> Result<()> {
        self.check_projection(proj)?;
        let chirp = self.chirp;
        let start = sink.len();
        let n_rows = self.kernel.cfg.n_range_bins;
        let (kernel, mut blocks) = self.split(n_rows);
        for block in blocks.drain(..) {
            kernel.run_block(block, proj, chirp, sink);
        }
        sink[start..].sort_unstable();
        self.cursor += proj.len();
        Ok(())
    }

    /// Mark `proj` as consumed after its blocks were run externally.
    pub fn advance(&mut self, proj: &Projection) -> Result<()> {
        self.check_projection(proj)?;
        self.cursor += proj.len();
        Ok(())
    }

    /// Process one whole chirp.
    pub fn process_chirp(
        &mut self,
        chirp: ChirpView<'_>,
        chirp_idx: u32,
        mode: ChirpMode,
        sink: &mut Vec<SpikeEvent>,
    ) -> Result<()> {
        self.check_chirp(chirp)?;
        self.begin_chirp(chirp_idx, mode);
        let proj = self.project(chirp, 0..self.kernel.cfg.n_samples)?;
        self.feed(&proj, sink)
    }

    /// Current decoded intensity of every neuron: `max(g, 0)` without a
    /// codec, otherwise the codec's readout.
    pub fn readout_map(&self) -> RangeAngleMap {
        let values = self
            .neurons
            .iter()
            .zip(&self.codec)
            .map(|(n, c)| self.kernel.readout(n, c))
            .collect();
        RangeAngleMap::from_vec(self.kernel.cfg.n_range_bins, self.kernel.cfg.n_angle_bins, values)
            .expect("grid shape is consistent")
    }

    /// `‖s‖` of every neuron.
    pub fn magnitude_map(&self) -> RangeAngleMap {
        let values = self.neurons.iter().map(|n| magnitude(n.s)).collect();
        RangeAngleMap::from_vec(self.kernel.cfg.n_range_bins, self.kernel.cfg.n_angle_bins, values)
            .expect("grid shape is consistent")
    }
}
