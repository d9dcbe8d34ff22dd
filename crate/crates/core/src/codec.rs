//! Spiking functions that turn a resonator's envelope and gradient into
//! spikes, and the decoders that turn spikes back into map intensities.
//!
//! Three codecs are provided:
//!
//! * **adaptive threshold** – a positive spike whenever `s_max` crosses its
//!   threshold, a negative spike whenever `w_max` crosses its own; each spike
//!   raises the crossed threshold by `γ`. Readout is `N⁺ − N⁻`.
//! * **rate-coded LIF** – a leaky integrator driven by the gradient `g`,
//!   reset by subtraction. Readout is the spike count.
//! * **time-coded LIF** – the same integrator, but at most one spike per
//!   chirp. Readout is `T_c − t_s`.
//!
//! All codec state is reset at the start of every chirp. Codecs only read
//! the resonator state.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Sign of a spike. Negative spikes only come from the adaptive codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[repr(i8)]
pub enum Polarity {
    Negative = -1,
    Positive = 1,
}

impl Polarity {
    pub fn as_i8(self) -> i8 {
        self as i8
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// One spike leaving the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpikeEvent {
    pub chirp: u32,
    pub sample: u32,
    pub range_bin: u16,
    pub angle_bin: u16,
    pub polarity: Polarity,
}

/// Leaky integrate-and-fire parameters. `tau` is in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LifParams {
    pub u_th: f64,
    pub u_rest: f64,
    pub tau: f64,
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if !(self.u_th > 0.0) {
            return Err(Error::invalid("u_th", "must be positive"));
        }
        if !self.u_rest.is_finite() {
            return Err(Error::invalid("u_rest", "must be finite"));
        }
        Ok(())
    }

    /// Membrane value after one forward-Euler step (Δt = 1 sample) of
    /// `τ du/dt = −u + g + u_rest`.
    #[inline]
    pub fn integrate(&self, u: f64, g: f64) -> f64 {
        u + (-u + g + self.u_rest) / self.tau
    }

    /// Membrane value reached from `u = 0` after `n` steps with `g = 0`:
    /// `u_rest·(1 − (1 − 1/τ)ⁿ)`.
    pub fn plateau(&self, n: usize) -> f64 {
        let mut decay = 1.0;
        for _ in 0..n {
            decay *= 1.0 - 1.0 / self.tau;
        }
        self.u_rest * (1.0 - decay)
    }
}

/// Which spiking function sits behind the resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum CodecConfig {
    /// No spikes; the grid is read out through its gradient estimate.
    None,
    Adaptive { gamma: f64 },
    Rate(LifParams),
    Time(LifParams),
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            CodecConfig::None => Ok(()),
            CodecConfig::Adaptive { gamma } => {
                if *gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("gamma", "must be positive"))
                }
            }
            CodecConfig::Rate(p) | CodecConfig::Time(p) => p.validate(),
        }
    }

    pub fn initial_state(&self) -> CodecState {
        match self {
            CodecConfig::None => CodecState::None,
            CodecConfig::Adaptive { gamma } => CodecState::Adaptive(AdaptiveThresholdState::new(*gamma)),
            CodecConfig::Rate(_) | CodecConfig::Time(_) => CodecState::Lif(LifState::default()),
        }
    }
}

impl fmt::Display for CodecConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecConfig::None => f.write_str("none"),
            CodecConfig::Adaptive { gamma } => write!(f, "adaptive(γ={gamma})"),
            CodecConfig::Rate(p) => write!(f, "rate(u_th={}, u_rest={}, τ={})", p.u_th, p.u_rest, p.tau),
            CodecConfig::Time(p) => write!(f, "time(u_th={}, u_rest={}, τ={})", p.u_th, p.u_rest, p.tau),
        }
    }
}

/// Spikes emitted by one neuron in one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Emission {
    pub positive: u32,
    pub negative: u32,
}

impl Emission {
    pub const NONE: Emission = Emission {
        positive: 0,
        negative: 0,
    };

    pub fn is_empty(&self) -> bool {
        self.positive == 0 && self.negative == 0
    }
}

/// Adaptive-threshold codec state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveThresholdState {
    pub u_th_s: f64,
    pub u_th_w: f64,
    pub n_pos: u32,
    pub n_neg: u32,
    pub gamma: f64,
}

impl AdaptiveThresholdState {
    /// Thresholds start one increment above zero, so the first spike fires
    /// when the tracked maximum first exceeds `γ`.
    pub fn new(gamma: f64) -> Self {
        Self {
            u_th_s: gamma,
            u_th_w: gamma,
            n_pos: 0,
            n_neg: 0,
            gamma,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.gamma);
    }

    pub fn readout(&self) -> f64 {
        decode_adaptive(self.n_pos, self.n_neg)
    }
}

/// One sample of the adaptive codec. Every threshold crossing in the sample
/// produces its own spike.
#[inline]
pub fn adaptive_step(st: &mut AdaptiveThresholdState, s_max: f64, w_max: f64) -> Emission {
    let mut e = Emission::NONE;
    while s_max > st.u_th_s {
        st.u_th_s += st.gamma;
        st.n_pos += 1;
        e.positive += 1;
    }
    while w_max > st.u_th_w {
        st.u_th_w += st.gamma;
        st.n_neg += 1;
        e.negative += 1;
    }
    e
}

/// Membrane state shared by the rate- and time-coded codecs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LifState {
    pub u: f64,
    pub n_spikes: u32,
    /// Sample index of the first spike of the current chirp; once set the
    /// time-coded neuron stays refractory until the chirp ends.
    pub first_spike: Option<u32>,
}

impl LifState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn refractory_done(&self) -> bool {
        self.first_spike.is_some()
    }
}

/// Rate-coded LIF step; reset by subtraction.
///
/// At most one spike per sample, so `u < u_th` holds after the step as long
/// as one sample's input `(g + u_rest − u)/τ` stays below `u_th`.
#[inline]
pub fn rate_lif_step(st: &mut LifState, g: f64, p: &LifParams, sample: u32) -> bool {
    st.u = p.integrate(st.u, g);
    if st.u >= p.u_th {
        st.u -= p.u_th;
        st.n_spikes += 1;
        if st.first_spike.is_none() {
            st.first_spike = Some(sample);
        }
        true
    } else {
        false
    }
}

/// Integrate-and-fire step without leak, `u += (g + u_rest)/τ`; reset by
/// subtraction. Over a window of `T` samples with constant drive it fires
/// `⌊(g + u_rest)·T/(u_th·τ)⌋` times.
#[inline]
pub fn if_step(st: &mut LifState, g: f64, p: &LifParams, sample: u32) -> bool {
    st.u += (g + p.u_rest) / p.tau;
    if st.u >= p.u_th {
        st.u -= p.u_th;
        st.n_spikes += 1;
        if st.first_spike.is_none() {
            st.first_spike = Some(sample);
        }
        true
    } else {
        false
    }
}

/// Time-coded LIF step; at most one spike per chirp.
#[inline]
pub fn time_lif_step(st: &mut LifState, g: f64, p: &LifParams, sample: u32) -> bool {
    if st.first_spike.is_some() {
        return false;
    }
    st.u = p.integrate(st.u, g);
    if st.u >= p.u_th {
        st.n_spikes = 1;
        st.first_spike = Some(sample);
        true
    } else {
        false
    }
}

/// Linear time decoding: `T_c − t_s`, or 0 without a spike.
pub fn decode_time(t_s: Option<u32>, t_c: usize) -> f64 {
    match t_s {
        Some(t) => (t_c as f64 - t as f64).max(0.0),
        None => 0.0,
    }
}

/// Spike-count readout of the rate-coded codec.
pub fn decode_rate(n_spikes: u32) -> f64 {
    n_spikes as f64
}

/// Signed spike-count readout of the adaptive codec.
pub fn decode_adaptive(n_pos: u32, n_neg: u32) -> f64 {
    n_pos as f64 - n_neg as f64
}

/// Per-neuron codec state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodecState {
    None,
    Adaptive(AdaptiveThresholdState),
    Lif(LifState),
}

impl CodecState {
    pub fn reset(&mut self) {
        match self {
            CodecState::None => {}
            CodecState::Adaptive(s) => s.reset(),
            CodecState::Lif(s) => s.reset(),
        }
    }
}

/// Rebuild per-neuron readouts from a spike stream.
///
/// Only events of `chirp` with `sample < up_to` are used. The result is a
/// row-major `[n_range_bins][n_angle_bins]` intensity map, clamped at 0.
pub fn decode_stream(
    events: &[SpikeEvent],
    codec: &CodecConfig,
    chirp: u32,
    up_to: usize,
    n_range_bins: usize,
    n_angle_bins: usize,
    n_samples: usize,
) -> Result<Vec<f64>> {
    let cells = n_range_bins * n_angle_bins;
    let mut acc = vec![0.0f64; cells];
    let mut first: Vec<Option<u32>> = vec![None; cells];
    for e in events.iter().filter(|e| e.chirp == chirp && (e.sample as usize) < up_to) {
        let (r, a) = (e.range_bin as usize, e.angle_bin as usize);
        if r >= n_range_bins || a >= n_angle_bins {
            return Err(Error::OutOfField { index: r * n_angle_bins + a });
        }
        let i = r * n_angle_bins + a;
        acc[i] += e.polarity.as_i8() as f64;
        first[i] = Some(first[i].map_or(e.sample, |s| s.min(e.sample)));
    }
    Ok(match codec {
        CodecConfig::Time(_) => first.iter().map(|t| decode_time(*t, n_samples)).collect(),
        _ => acc.into_iter().map(|v| v.max(0.0)).collect(),
    })
}
