//! Model selection and whole-frame processing.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::cfar::CfarConfig;
use crate::codec::{CodecConfig, LifParams, SpikeEvent};
use crate::dft::{FtBaseline, RangeAngleMap};
use crate::resonator::{ChirpMode, Grid, GridConfig, Projection};
use crate::signal::ChirpFrame;
use crate::{Error, Result};

/// Named numeric parameters, as read from parameter files and sweep grids.
pub type ParamSet = BTreeMap<String, f64>;

/// Every parameter name understood by [`ModelSpec::with_params`].
pub const PARAM_NAMES: [&str; 8] = [
    "alpha_x",
    "alpha_g",
    "gamma",
    "u_th",
    "u_rest",
    "tau",
    "cfar_alpha",
    "cfar_offset",
];

/// Parameters of the gradient estimation.
pub const GRADIENT_PARAMS: [&str; 2] = ["alpha_x", "alpha_g"];
/// Parameters of the detector.
pub const CFAR_PARAMS: [&str; 2] = ["cfar_alpha", "cfar_offset"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    /// 2-D DFT magnitude.
    Ft,
    /// Resonator grid read out through `max(g, 0)`.
    Gradient,
    Adaptive,
    Rate,
    Time,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Ft,
        ModelKind::Gradient,
        ModelKind::Adaptive,
        ModelKind::Rate,
        ModelKind::Time,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ft => "ft",
            ModelKind::Gradient => "gradient",
            ModelKind::Adaptive => "adaptive",
            ModelKind::Rate => "rate",
            ModelKind::Time => "time",
        }
    }

    pub fn is_spiking(self) -> bool {
        matches!(self, ModelKind::Adaptive | ModelKind::Rate | ModelKind::Time)
    }

    /// Parameters of the spiking function.
    pub fn codec_params(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ft | ModelKind::Gradient => &[],
            ModelKind::Adaptive => &["gamma"],
            ModelKind::Rate | ModelKind::Time => &["u_th", "u_rest", "tau"],
        }
    }

    /// Every parameter that influences this model's output.
    pub fn params(self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self != ModelKind::Ft {
            out.extend(GRADIENT_PARAMS);
        }
        out.extend(self.codec_params());
        out.extend(CFAR_PARAMS);
        out
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("model", alloc::format!("unknown model `{s}`")))
    }
}

/// How the chirps of a frame are combined into one map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    /// First chirp only.
    #[default]
    Single,
    /// All chirps with `g` carried over; the map is read after the last one.
    Continuous,
    /// Every chirp from reset; the map is the mean of the per-chirp maps.
    Average,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Single, Mode::Continuous, Mode::Average];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Continuous => "continuous",
            Mode::Average => "average",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("mode", alloc::format!("unknown mode `{s}`")))
    }
}

/// Samples per chirp the built-in time-codec threshold is placed for.
pub const DEFAULT_N_SAMPLES: usize = 512;

/// Height of the default time-codec threshold above the membrane plateau.
pub const TIME_DEFAULT_HEADROOM: f64 = 0.01;

/// Time-codec parameters with `u_th` placed `headroom` above the value an
/// undriven membrane reaches by the end of a [`DEFAULT_N_SAMPLES`] chirp.
/// Only neurons with enough positive drive cross it before the chirp ends.
pub fn time_params(headroom: f64) -> LifParams {
    let mut p = LifParams { u_th: 0.0, u_rest: 250.0, tau: 100.0 };
    p.u_th = p.plateau(DEFAULT_N_SAMPLES) + headroom;
    p
}

/// A fully parameterised model: gradient estimation, spiking function and
/// detector.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub alpha_x: f64,
    pub alpha_g: f64,
    pub codec: CodecConfig,
    pub cfar: CfarConfig,
}

impl ModelSpec {
    /// Built-in defaults, tuned on the desk-profile training data.
    pub fn defaults(kind: ModelKind) -> Self {
        let (codec, cfar) = match kind {
            ModelKind::Ft => (CodecConfig::None, CfarConfig { alpha: 4.0, offset: 0.25 }),
            ModelKind::Gradient => (CodecConfig::None, CfarConfig { alpha: 4.0, offset: 0.001 }),
            ModelKind::Adaptive => (CodecConfig::Adaptive { gamma: 0.2 }, CfarConfig { alpha: 3.0, offset: 8.0 }),
            ModelKind::Rate => (
                CodecConfig::Rate(LifParams { u_th: 0.006, u_rest: 0.0, tau: 300.0 }),
                CfarConfig { alpha: 3.0, offset: 0.25 },
            ),
            ModelKind::Time => (
                CodecConfig::Time(time_params(TIME_DEFAULT_HEADROOM)),
                CfarConfig { alpha: 3.0, offset: 0.25 },
            ),
        };
        Self {
            kind,
            alpha_x: 0.3,
            alpha_g: 0.001,
            codec,
            cfar,
        }
    }

    /// Published parameter values for the single-chirp and the consecutive
    /// chirp use cases. The detector keeps the built-in defaults.
    pub fn published(kind: ModelKind, mode: Mode) -> Self {
        let multi = mode == Mode::Continuous;
        let codec = match kind {
            ModelKind::Ft | ModelKind::Gradient => CodecConfig::None,
            ModelKind::Adaptive => CodecConfig::Adaptive { gamma: 0.1 },
            ModelKind::Rate => CodecConfig::Rate(LifParams {
                u_th: if multi { 1.5 } else { 0.35 },
                u_rest: 0.0,
                tau: 100.0,
            }),
            ModelKind::Time => CodecConfig::Time(LifParams {
                u_th: if multi { 232.0 } else { 231.0 },
                u_rest: 250.0,
                tau: 200.0,
            }),
        };
        Self {
            alpha_x: 0.6,
            alpha_g: 0.001,
            codec,
            ..Self::defaults(kind)
        }
    }

    /// Override fields from `params`. Names that exist but do not apply to
    /// this model are ignored; unknown names are rejected.
    pub fn with_params(mut self, params: &ParamSet) -> Result<Self> {
        for (name, &v) in params {
            match name.as_str() {
                "alpha_x" => self.alpha_x = v,
                "alpha_g" => self.alpha_g = v,
                "cfar_alpha" => self.cfar.alpha = v,
                "cfar_offset" => self.cfar.offset = v,
                "gamma" => {
                    if let CodecConfig::Adaptive { gamma } = &mut self.codec {
                        *gamma = v;
                    }
                }
                "u_th" | "u_rest" | "tau" => {
                    if let CodecConfig::Rate(p) | CodecConfig::Time(p) = &mut self.codec {
                        match name.as_str() {
                            "u_th" => p.u_th = v,
                            "u_rest" => p.u_rest = v,
                            _ => p.tau = v,
                        }
                    }
                }
                _ => return Err(Error::UnknownParameter(name.clone())),
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Values of every parameter in [`ModelKind::params`].
    pub fn params(&self) -> ParamSet {
        let mut out = ParamSet::new();
        let mut put = |k: &str, v: f64| {
            out.insert(k.to_string(), v);
        };
        if self.kind != ModelKind::Ft {
            put("alpha_x", self.alpha_x);
            put("alpha_g", self.alpha_g);
        }
        match self.codec {
            CodecConfig::None => {}
            CodecConfig::Adaptive { gamma } => put("gamma", gamma),
            CodecConfig::Rate(p) | CodecConfig::Time(p) => {
                put("u_th", p.u_th);
                put("u_rest", p.u_rest);
                put("tau", p.tau);
            }
        }
        put("cfar_alpha", self.cfar.alpha);
        put("cfar_offset", self.cfar.offset);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            ModelKind::Ft | ModelKind::Gradient => matches!(self.codec, CodecConfig::None),
            ModelKind::Adaptive => matches!(self.codec, CodecConfig::Adaptive { .. }),
            ModelKind::Rate => matches!(self.codec, CodecConfig::Rate(_)),
            ModelKind::Time => matches!(self.codec, CodecConfig::Time(_)),
        };
        if !expected {
            return Err(Error::invalid("codec", "does not match the model kind"));
        }
        self.codec.validate()?;
        self.cfar.validate()?;
        self.grid_config(2, 1).validate()
    }

    /// Grid over the positive-frequency half with one angle bin per antenna.
    pub fn grid_config(&self, n_samples: usize, n_vx: usize) -> GridConfig {
        GridConfig {
            alpha_g: self.alpha_g,
            alpha_x: self.alpha_x,
            ..GridConfig::new(n_samples, n_vx)
        }
    }
}

/// Runs one projected block of samples through a grid.
///
/// Implementations may split the grid across workers but must leave the
/// grid and the appended spikes exactly as [`Grid::feed`] does.
pub trait Executor: Sync {
    fn feed(&self, grid: &mut Grid, proj: &Projection, sink: &mut Vec<SpikeEvent>) -> Result<()>;
}

/// Single-threaded execution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn feed(&self, grid: &mut Grid, proj: &Projection, sink: &mut Vec<SpikeEvent>) -> Result<()> {
        grid.feed(proj, sink)
    }
}

/// Result of processing one frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub map: RangeAngleMap,
    /// Spikes of every processed chirp, sorted.
    pub spikes: Vec<SpikeEvent>,
    pub chirps_processed: usize,
    /// Final grid state; `None` for the FT baseline.
    pub grid: Option<Grid>,
}

impl FrameOutput {
    pub fn spikes_per_chirp(&self) -> f64 {
        if self.chirps_processed == 0 {
            0.0
        } else {
            self.spikes.len() as f64 / self.chirps_processed as f64
        }
    }
}

/// Process a frame with the given model and chirp mode.
pub fn run_frame<E: Executor + ?Sized>(
    frame: &ChirpFrame,
    spec: &ModelSpec,
    mode: Mode,
    exec: &E,
) -> Result<FrameOutput> {
    spec.validate()?;
    if frame.n_chirps() == 0 {
        return Err(Error::Empty("frame"));
    }
    let cfg = spec.grid_config(frame.n_samples(), frame.n_vx());
    if spec.kind == ModelKind::Ft {
        let ft = FtBaseline::new(cfg, frame.n_vx())?;
        let (map, chirps) = match mode {
            Mode::Single => (ft.map(frame.chirp(0))?, 1),
            Mode::Average => (ft.map_avg(frame.chirps())?, frame.n_chirps()),
            Mode::Continuous => {
                return Err(Error::Unsupported {
                    model: "ft",
                    what: "continuous mode",
                })
            }
        };
        return Ok(FrameOutput {
            map,
            spikes: Vec::new(),
            chirps_processed: chirps,
            grid: None,
        });
    }

    let mut grid = Grid::new(cfg, frame.n_vx(), spec.codec)?;
    let mut spikes = Vec::new();
    let n_chirps = match mode {
        Mode::Single => 1,
        Mode::Continuous | Mode::Average => frame.n_chirps(),
    };
    let chirp_mode = match mode {
        Mode::Continuous => ChirpMode::Continuous,
        Mode::Single | Mode::Average => ChirpMode::Reset,
    };
    let mut maps = Vec::new();
    for c in 0..n_chirps {
        grid.begin_chirp(c as u32, chirp_mode);
        let proj = grid.project(frame.chirp(c), 0..frame.n_samples())?;
        exec.feed(&mut grid, &proj, &mut spikes)?;
        if mode == Mode::Average {
            maps.push(grid.readout_map());
        }
    }
    let map = match mode {
        Mode::Average => RangeAngleMap::mean_of(&maps)?,
        Mode::Single | Mode::Continuous => grid.readout_map(),
    };
    Ok(FrameOutput {
        map,
        spikes,
        chirps_processed: n_chirps,
        grid: Some(grid),
    })
}
