//! Point-target FMCW scene description and raw IF data synthesis.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Complex additive noise used by the built-in dataset recipes (per real and
/// imaginary component).
pub const DEFAULT_NOISE_STDDEV: f64 = 0.02;

/// Sensor description. Times are seconds, frequencies Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadarParams {
    pub f0: f64,
    pub bandwidth: f64,
    pub n_samples: usize,
    pub n_chirps: usize,
    pub n_vx: usize,
    pub t_chirp: f64,
    pub t_wait: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_spacing"))]
    pub antenna_spacing_wavelengths: f64,
}

#[cfg(feature = "serde")]
fn default_spacing() -> f64 {
    0.5
}

impl RadarParams {
    /// 76 GHz sensor with 507.6 MHz sweep, 512 samples, 32 virtual antennas
    /// and 32 chirps per frame.
    pub fn full() -> Self {
        Self {
            f0: 76.0e9,
            bandwidth: 507.6e6,
            n_samples: 512,
            n_chirps: 32,
            n_vx: 32,
            t_chirp: 20.52e-6,
            t_wait: 5.96e-6,
            antenna_spacing_wavelengths: 0.5,
        }
    }

    /// The full sensor cut down to 8 chirps per frame.
    pub fn desk() -> Self {
        Self {
            n_chirps: 8,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("n_samples", self.n_samples),
            ("n_chirps", self.n_chirps),
            ("n_vx", self.n_vx),
        ] {
            if n == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::invalid("bandwidth", "must be positive"));
        }
        if !(self.t_chirp > 0.0) {
            return Err(Error::invalid("t_chirp", "must be positive"));
        }
        if !(self.t_wait >= 0.0) {
            return Err(Error::invalid("t_wait", "must be non-negative"));
        }
        if !(self.antenna_spacing_wavelengths > 0.0) {
            return Err(Error::invalid(
                "antenna_spacing_wavelengths",
                "must be positive",
            ));
        }
        Ok(())
    }

    /// ADC sampling interval Δt.
    pub fn sample_interval(&self) -> f64 {
        self.t_chirp / self.n_samples as f64
    }

    /// Beat angular frequency ω (rad/s) of a reflector at `range_m`.
    pub fn beat_omega(&self, range_m: f64) -> f64 {
        2.0 * PI * (2.0 * self.bandwidth * range_m) / (SPEED_OF_LIGHT * self.t_chirp)
    }

    /// Phase advance of the beat tone per ADC sample.
    pub fn beat_phase_per_sample(&self, range_m: f64) -> f64 {
        self.beat_omega(range_m) * self.sample_interval()
    }

    /// Width of one DFT range bin in meters.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// Fractional range-bin position of a reflector.
    pub fn range_to_bin(&self, range_m: f64) -> f64 {
        range_m / self.range_resolution()
    }

    pub fn bin_to_range(&self, bin: f64) -> f64 {
        bin * self.range_resolution()
    }

    /// Largest range whose beat tone stays below Nyquist.
    pub fn max_range(&self) -> f64 {
        self.bin_to_range(self.n_samples as f64 / 2.0)
    }

    /// Inter-antenna phase step for a plane wave from `azimuth_rad`.
    pub fn antenna_phase(&self, azimuth_rad: f64) -> f64 {
        2.0 * PI * self.antenna_spacing_wavelengths * Float::sin(azimuth_rad)
    }
}

impl Default for RadarParams {
    fn default() -> Self {
        Self::desk()
    }
}

/// A static point reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointTarget {
    /// Radial distance, meters.
    pub range_m: f64,
    /// Direction of arrival, radians, broadside = 0.
    pub azimuth_rad: f64,
    /// Reflectivity; see [`AmplitudeModel`] for how it maps to amplitude.
    pub rcs: f64,
    /// Kept for completeness; targets are rendered static.
    #[cfg_attr(feature = "serde", serde(default))]
    pub velocity_mps: f64,
}

impl PointTarget {
    pub fn new(range_m: f64, azimuth_rad: f64, rcs: f64) -> Self {
        Self {
            range_m,
            azimuth_rad,
            rcs,
            velocity_mps: 0.0,
        }
    }
}

/// How a target's `rcs` turns into the linear amplitude at 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AmplitudeModel {
    /// `rcs` is already a linear amplitude.
    #[default]
    Linear,
    /// `rcs` is a dataset σ value, amplitude `1 + σ/10`, so σ = 0 targets
    /// still reflect.
    SigmaOffset,
}

impl AmplitudeModel {
    pub fn amplitude_scale(self, rcs: f64) -> f64 {
        match self {
            AmplitudeModel::Linear => rcs,
            AmplitudeModel::SigmaOffset => 1.0 + rcs / 10.0,
        }
    }
}

/// A labeled scene: targets, noise level, RNG seed and sensor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scene {
    pub targets: Vec<PointTarget>,
    /// Standard deviation of the real and of the imaginary noise component.
    pub noise_stddev: f64,
    pub seed: u64,
    pub params: RadarParams,
    #[cfg_attr(feature = "serde", serde(default))]
    pub amplitude_model: AmplitudeModel,
}

impl Scene {
    pub fn new(params: RadarParams, targets: Vec<PointTarget>, noise_stddev: f64, seed: u64) -> Self {
        Self {
            targets,
            noise_stddev,
            seed,
            params,
            amplitude_model: AmplitudeModel::Linear,
        }
    }

    /// Received amplitude of target `k`: scale / (r / 1 m)².
    pub fn amplitude(&self, target: &PointTarget) -> f64 {
        let r = target.range_m;
        self.amplitude_model.amplitude_scale(target.rcs) / (r * r)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.noise_stddev >= 0.0) {
            return Err(Error::invalid("noise_stddev", "must be non-negative"));
        }
        for (index, t) in self.targets.iter().enumerate() {
            if !(t.range_m > 0.0) {
                return Err(Error::invalid("range_m", format!("target {index} must have positive range")));
            }
            if !(Float::abs(t.azimuth_rad) <= PI / 2.0) {
                return Err(Error::invalid(
                    "azimuth_rad",
                    format!("target {index} must lie within ±π/2"),
                ));
            }
            if self.params.beat_phase_per_sample(t.range_m) >= PI {
                return Err(Error::RangeOutOfBounds {
                    index,
                    range_m: t.range_m,
                    max_range_m: self.params.max_range(),
                });
            }
        }
        Ok(())
    }
}

/// Raw complex IF samples, laid out `[chirp][sample][antenna]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpFrame {
    n_chirps: usize,
    n_samples: usize,
    n_vx: usize,
    samples: Vec<Complex64>,
}

impl ChirpFrame {
    pub fn zeros(n_chirps: usize, n_samples: usize, n_vx: usize) -> Self {
        Self {
            n_chirps,
            n_samples,
            n_vx,
            samples: vec![Complex64::new(0.0, 0.0); n_chirps * n_samples * n_vx],
        }
    }

    pub fn from_vec(n_chirps: usize, n_samples: usize, n_vx: usize, samples: Vec<Complex64>) -> Result<Self> {
        let expected = n_chirps * n_samples * n_vx;
        if samples.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: samples.len(),
            });
        }
        Ok(Self {
            n_chirps,
            n_samples,
            n_vx,
            samples,
        })
    }

    pub fn n_chirps(&self) -> usize {
        self.n_chirps
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_vx(&self) -> usize {
        self.n_vx
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn at(&self, chirp: usize, sample: usize, antenna: usize) -> Complex64 {
        self.samples[(chirp * self.n_samples + sample) * self.n_vx + antenna]
    }

    pub fn chirp(&self, chirp: usize) -> ChirpView<'_> {
        let len = self.n_samples * self.n_vx;
        ChirpView {
            data: &self.samples[chirp * len..(chirp + 1) * len],
            n_samples: self.n_samples,
            n_vx: self.n_vx,
        }
    }

    pub fn chirps(&self) -> impl Iterator<Item = ChirpView<'_>> {
        (0..self.n_chirps).map(move |c| self.chirp(c))
    }
}

/// One chirp of a frame: an `[n_samples][n_vx]` matrix.
#[derive(Debug, Clone, Copy)]
pub struct ChirpView<'a> {
    data: &'a [Complex64],
    n_samples: usize,
    n_vx: usize,
}

impl<'a> ChirpView<'a> {
    pub fn new(data: &'a [Complex64], n_samples: usize, n_vx: usize) -> Result<Self> {
        if data.len() != n_samples * n_vx {
            return Err(Error::LengthMismatch {
                expected: n_samples * n_vx,
                actual: data.len(),
            });
        }
        Ok(Self { data, n_samples, n_vx })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_vx(&self) -> usize {
        self.n_vx
    }

    /// Antenna vector x⃗ at sample `n`.
    pub fn sample(&self, n: usize) -> &'a [Complex64] {
        &self.data[n * self.n_vx..(n + 1) * self.n_vx]
    }

    pub fn as_slice(&self) -> &'a [Complex64] {
        self.data
    }
}

/// Render a scene into raw IF data.
///
/// Every target contributes `a·e^{i m φ}·e^{i ω t_n}` on antenna `m` at
/// `t_n = n·t_chirp/n_samples`, and independent `N(0, σ²)` noise is added to
/// the real and imaginary part of every sample. Static targets make every
/// chirp carry the same tone; only the noise differs.
pub fn synthesize(scene: &Scene) -> Result<ChirpFrame> {
    scene.validate()?;
    let p = &scene.params;
    let (n_samples, n_vx) = (p.n_samples, p.n_vx);

    let mut clean = vec![Complex64::new(0.0, 0.0); n_samples * n_vx];
    let mut steering = vec![Complex64::new(0.0, 0.0); n_vx];
    for target in &scene.targets {
        let amp = scene.amplitude(target);
        let phi = p.antenna_phase(target.azimuth_rad);
        let step = p.beat_phase_per_sample(target.range_m);
        for (m, s) in steering.iter_mut().enumerate() {
            *s = Complex64::cis(m as f64 * phi) * amp;
        }
        for n in 0..n_samples {
            let tone = Complex64::cis(step * n as f64);
            let row = &mut clean[n * n_vx..(n + 1) * n_vx];
            for (x, s) in row.iter_mut().zip(&steering) {
                *x += tone * s;
            }
        }
    }

    let mut samples = Vec::with_capacity(p.n_chirps * clean.len());
    for _ in 0..p.n_chirps {
        samples.extend_from_slice(&clean);
    }
    if scene.noise_stddev > 0.0 {
        let normal = Normal::new(0.0, scene.noise_stddev)
            .map_err(|_| Error::invalid("noise_stddev", "not a valid standard deviation"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        for x in samples.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *x += Complex64::new(re, im);
        }
    }
    ChirpFrame::from_vec(p.n_chirps, n_samples, n_vx, samples)
}

/// Named scene generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Recipe {
    /// Two neighbouring targets, σ = 10 and σ = 20.
    CloseTargets2010,
    /// Two neighbouring targets, σ = 10 and σ = 0.
    CloseTargets0010,
    /// Five random targets, σ = [0, 5, 10, 15, 20].
    Mixed5,
    /// Five random targets, σ = [0, 0, 5, 5, 10].
    Persons5,
    /// One to eight random targets with random σ.
    Targets8,
}

impl Recipe {
    pub const ALL: [Recipe; 5] = [
        Recipe::CloseTargets2010,
        Recipe::CloseTargets0010,
        Recipe::Mixed5,
        Recipe::Persons5,
        Recipe::Targets8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::CloseTargets2010 => "close_targets_2010",
            Recipe::CloseTargets0010 => "close_targets_0010",
            Recipe::Mixed5 => "mixed_5",
            Recipe::Persons5 => "persons_5",
            Recipe::Targets8 => "targets_8",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::UnknownRecipe(String::from(s)))
    }
}

/// Knobs for [`make_dataset_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub params: RadarParams,
    pub noise_stddev: f64,
    /// Targets are kept inside the first `n_range_bins` range bins.
    pub n_range_bins: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let params = RadarParams::desk();
        Self {
            params,
            noise_stddev: DEFAULT_NOISE_STDDEV,
            n_range_bins: params.n_samples / 2,
        }
    }
}

/// Margin (in range bins) kept free at both ends of the range field.
const RANGE_MARGIN_BINS: f64 = 4.0;
/// Random targets satisfy `|sin θ| ≤ SIN_LIMIT`.
const SIN_LIMIT: f64 = 0.95;

/// Generate `n_scenes` scenes of `recipe` with the desk sensor.
pub fn make_dataset(recipe: &str, n_scenes: usize, seed: u64) -> Result<Vec<Scene>> {
    let recipe: Recipe = recipe.parse()?;
    make_dataset_with(recipe, n_scenes, seed, &DatasetConfig::default())
}

/// Generate `n_scenes` scenes. Scene `i` depends only on `(recipe, seed, i)`.
pub fn make_dataset_with(recipe: Recipe, n_scenes: usize, seed: u64, cfg: &DatasetConfig) -> Result<Vec<Scene>> {
    cfg.params.validate()?;
    let max_bins = (cfg.params.n_samples / 2).min(cfg.n_range_bins) as f64;
    if max_bins < 2.0 * RANGE_MARGIN_BINS + 4.0 {
        return Err(Error::invalid("n_range_bins", "range field too small for dataset generation"));
    }
    Ok((0..n_scenes)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, recipe.tag(), i as u64));
            let targets = place_targets(recipe, &mut rng, &cfg.params, max_bins);
            Scene {
                targets,
                noise_stddev: cfg.noise_stddev,
                seed: rng.random(),
                params: cfg.params,
                amplitude_model: AmplitudeModel::SigmaOffset,
            }
        })
        .collect())
}

fn place_targets(recipe: Recipe, rng: &mut ChaCha8Rng, p: &RadarParams, max_bins: f64) -> Vec<PointTarget> {
    let bin_lo = RANGE_MARGIN_BINS;
    let bin_hi = max_bins - RANGE_MARGIN_BINS;
    // one angle bin expressed in sin θ units
    let sin_step = 1.0 / (p.n_vx as f64 * p.antenna_spacing_wavelengths);
    let random_target = |rng: &mut ChaCha8Rng, sigma: f64| {
        let bin = rng.random_range(bin_lo..bin_hi);
        let sin = rng.random_range(-SIN_LIMIT..SIN_LIMIT);
        PointTarget::new(p.bin_to_range(bin), Float::asin(sin), sigma)
    };
    match recipe {
        Recipe::CloseTargets2010 | Recipe::CloseTargets0010 => {
            let sigma1 = if recipe == Recipe::CloseTargets2010 { 20.0 } else { 0.0 };
            let (dr, dl) = loop {
                let dr: i32 = rng.random_range(-3..=3);
                let dl: i32 = rng.random_range(-2..=2);
                if dr.abs().max(dl.abs()) >= 2 {
                    break (dr as f64, dl as f64);
                }
            };
            let bin = rng.random_range(bin_lo + 3.0..bin_hi - 3.0);
            let sin_margin = SIN_LIMIT - 2.0 * sin_step;
            let sin = rng.random_range(-sin_margin..sin_margin);
            vec![
                PointTarget::new(p.bin_to_range(bin), Float::asin(sin), 10.0),
                PointTarget::new(p.bin_to_range(bin + dr), Float::asin(sin + dl * sin_step), sigma1),
            ]
        }
        Recipe::Mixed5 => [0.0, 5.0, 10.0, 15.0, 20.0]
            .into_iter()
            .map(|s| random_target(rng, s))
            .collect(),
        Recipe::Persons5 => [0.0, 0.0, 5.0, 5.0, 10.0]
            .into_iter()
            .map(|s| random_target(rng, s))
            .collect(),
        Recipe::Targets8 => {
            let n = rng.random_range(1..=8usize);
            (0..n)
                .map(|_| {
                    let sigma = 5.0 * rng.random_range(0..=4u32) as f64;
                    random_target(rng, sigma)
                })
                .collect()
        }
    }
}

/// splitmix64 over the three inputs.
fn mix(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
