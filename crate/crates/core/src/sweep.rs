//! Exhaustive grid search over model parameters.
//!
//! Tuning runs in two stages. The first fixes the gradient estimation
//! (`alpha_x`, `alpha_g`) together with the detector; the second keeps the
//! gradient estimation and searches the spiking function. A codec-stage spec
//! may list detector grids too, since decoded spike maps live on their own
//! scale; it may never list gradient parameters.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::CodecConfig;
use crate::pipeline::{Mode, ModelKind, ModelSpec, ParamSet, DEFAULT_N_SAMPLES, GRADIENT_PARAMS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stage {
    GradientCfar,
    Codec,
}

/// One sweep: which model, which parameters to vary and which to hold.
///
/// Grids are walked in parameter-name order, the first name varying
/// slowest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepSpec {
    pub model: ModelKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mode: Mode,
    pub stage: Stage,
    pub grids: BTreeMap<String, Vec<f64>>,
    /// Held values, typically the winners of the previous stage.
    #[cfg_attr(feature = "serde", serde(default))]
    pub fixed: ParamSet,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let allowed = self.model.params();
        for (name, values) in &self.grids {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::UnknownParameter(format!("{name} (model {})", self.model)));
            }
            if values.is_empty() {
                return Err(Error::invalid("grids", format!("grid for `{name}` is empty")));
            }
        }
        for name in self.fixed.keys() {
            if !crate::pipeline::PARAM_NAMES.contains(&name.as_str()) {
                return Err(Error::UnknownParameter(name.clone()));
            }
        }
        let forbidden: &[&str] = match self.stage {
            Stage::GradientCfar => self.model.codec_params(),
            Stage::Codec => &GRADIENT_PARAMS,
        };
        if let Some(name) = self.grids.keys().find(|k| forbidden.contains(&k.as_str())) {
            return Err(Error::invalid(
                "grids",
                format!("`{name}` cannot be swept in the {:?} stage", self.stage),
            ));
        }
        if self.stage == Stage::Codec && !self.model.is_spiking() {
            return Err(Error::invalid("stage", "the codec stage needs a spiking model"));
        }
        self.base()?;
        Ok(())
    }

    /// Model defaults with the fixed parameters applied.
    pub fn base(&self) -> Result<ModelSpec> {
        ModelSpec::defaults(self.model).with_params(&self.fixed)
    }

    pub fn n_points(&self) -> usize {
        self.grids.values().map(Vec::len).product()
    }

    /// Every grid point (fixed values merged in), in lexicographic order.
    pub fn points(&self) -> Vec<ParamSet> {
        let axes: Vec<(&String, &Vec<f64>)> = self.grids.iter().collect();
        let total = self.n_points();
        let mut out = Vec::with_capacity(total);
        let mut idx = alloc::vec![0usize; axes.len()];
        for _ in 0..total {
            let mut p = self.fixed.clone();
            for ((name, values), &i) in axes.iter().zip(&idx) {
                p.insert((*name).clone(), values[i]);
            }
            out.push(p);
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].1.len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }

    /// Model spec of one grid point.
    pub fn spec_for(&self, point: &ParamSet) -> Result<ModelSpec> {
        ModelSpec::defaults(self.model).with_params(point)
    }
}

/// Objective value of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Score {
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredPoint {
    pub params: ParamSet,
    pub score: Score,
}

/// Every evaluated point plus the index of the winner.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub model: ModelKind,
    pub mode: Mode,
    pub table: Vec<ScoredPoint>,
    pub best_index: usize,
}

impl SweepResult {
    pub fn best(&self) -> &ScoredPoint {
        &self.table[self.best_index]
    }
}

/// Index of the highest F-score; the first one wins ties.
pub fn select_best(table: &[ScoredPoint]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in table.iter().enumerate() {
        let f = p.score.f_score;
        match best {
            None if !f.is_nan() => best = Some(i),
            Some(b) if f > table[b].score.f_score => best = Some(i),
            _ => {}
        }
    }
    best.or(if table.is_empty() { None } else { Some(0) })
}

/// Evaluate `objective` on every grid point, in order.
pub fn run_sweep<D, F>(spec: &SweepSpec, train: &[D], mut objective: F) -> Result<SweepResult>
where
    F: FnMut(&ModelSpec, &[D]) -> Result<Score>,
{
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let table = spec
        .points()
        .into_iter()
        .map(|params| {
            let score = objective(&spec.spec_for(&params)?, train)?;
            Ok(ScoredPoint { params, score })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(spec, table)
}

/// Wrap an already evaluated table (in [`SweepSpec::points`] order).
pub fn finish(spec: &SweepSpec, table: Vec<ScoredPoint>) -> Result<SweepResult> {
    let best_index = select_best(&table).ok_or(Error::Empty("sweep grid"))?;
    Ok(SweepResult {
        model: spec.model,
        mode: spec.mode,
        table,
        best_index,
    })
}

/// `center·{1/4, 1/2, 1, 2, 4}`.
pub fn log_bracket(center: f64) -> Vec<f64> {
    [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| center * f).collect()
}

/// Detector scale factors tried on every model.
pub const CFAR_ALPHAS: [f64; 6] = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0];

/// Gradient smoothing values tried in the first stage.
pub const ALPHA_X_GRID: [f64; 4] = [0.15, 0.3, 0.6, 1.0];

/// `center·{1/8, …, 8}` in factors of two.
pub fn wide_bracket(center: f64) -> Vec<f64> {
    [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|f| center * f).collect()
}

/// Built-in grids around the defaults of `model`.
pub fn default_grids(model: ModelKind, mode: Mode, stage: Stage) -> BTreeMap<String, Vec<f64>> {
    grids_around(&ModelSpec::defaults(model), mode, stage)
}

/// Grids centred on `spec`.
///
/// Single-chirp and average modes search `alpha_x`, `alpha_g` in the first
/// stage and every codec parameter in the second. Continuous mode only
/// refines around an already tuned spec: the gradient estimation and the
/// rate-codec time constant stay put, thresholds and the detector move.
pub fn grids_around(spec: &ModelSpec, mode: Mode, stage: Stage) -> BTreeMap<String, Vec<f64>> {
    let full = mode != Mode::Continuous;
    let mut g = BTreeMap::new();
    let mut put = |k: &str, v: Vec<f64>| {
        g.insert(String::from(k), v);
    };
    if stage == Stage::GradientCfar && spec.kind != ModelKind::Ft && full {
        put("alpha_x", ALPHA_X_GRID.to_vec());
        put("alpha_g", log_bracket(spec.alpha_g));
    }
    if stage == Stage::Codec {
        match spec.codec {
            CodecConfig::Adaptive { gamma } => put("gamma", log_bracket(gamma)),
            CodecConfig::Rate(p) => {
                put("u_th", log_bracket(p.u_th));
                if full {
                    put("tau", log_bracket(p.tau));
                }
            }
            CodecConfig::Time(p) => {
                let plateau = p.plateau(DEFAULT_N_SAMPLES);
                let headroom = p.u_th - plateau;
                let u_th = if headroom > 0.0 {
                    log_bracket(headroom).iter().map(|h| plateau + h).collect()
                } else {
                    log_bracket(p.u_th)
                };
                put("u_th", u_th);
            }
            CodecConfig::None => {}
        }
    }
    put("cfar_alpha", CFAR_ALPHAS.to_vec());
    put("cfar_offset", wide_bracket(spec.cfar.offset));
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spec(grids: &[(&str, Vec<f64>)]) -> SweepSpec {
        SweepSpec {
            model: ModelKind::Rate,
            mode: Mode::Single,
            stage: Stage::Codec,
            grids: grids.iter().map(|(k, v)| (String::from(*k), v.clone())).collect(),
            fixed: ParamSet::new(),
        }
    }

    #[test]
    fn lexicographic_points() {
        let s = spec(&[("tau", vec![10.0, 20.0]), ("u_th", vec![1.0, 2.0, 3.0])]);
        let pts = s.points();
        assert_eq!(pts.len(), 6);
        let pairs: Vec<_> = pts.iter().map(|p| (p["tau"], p["u_th"])).collect();
        assert_eq!(
            pairs,
            vec![(10.0, 1.0), (10.0, 2.0), (10.0, 3.0), (20.0, 1.0), (20.0, 2.0), (20.0, 3.0)]
        );
    }

    #[test]
    fn single_point_grid() {
        let s = spec(&[("u_th", vec![0.35])]);
        let r = run_sweep(&s, &[()], |_, _| Ok(Score { f_score: 0.4, ..Score::default() })).unwrap();
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.best().params["u_th"], 0.35);
    }

    #[test]
    fn first_best_wins_ties() {
        let s = spec(&[("u_th", vec![1.0, 2.0, 3.0, 4.0])]);
        let r = run_sweep(&s, &[()], |m, _| {
            let f = match m.codec {
                crate::codec::CodecConfig::Rate(p) if p.u_th >= 2.0 => 0.5,
                _ => 0.1,
            };
            Ok(Score { f_score: f, ..Score::default() })
        })
        .unwrap();
        assert_eq!(r.best_index, 1);
    }

    #[test]
    fn empty_dataset_rejected() {
        let s = spec(&[("u_th", vec![1.0])]);
        let train: [(); 0] = [];
        assert_eq!(
            run_sweep(&s, &train, |_, _| Ok(Score::default())),
            Err(Error::Empty("training dataset"))
        );
    }

    #[test]
    fn stage_isolation() {
        let s = spec(&[("alpha_g", vec![0.01])]);
        assert!(s.validate().is_err());
        let mut s = spec(&[("u_th", vec![1.0])]);
        s.stage = Stage::GradientCfar;
        assert!(s.validate().is_err());
        let s = spec(&[("u_th", vec![1.0]), ("cfar_offset", vec![0.5])]);
        assert!(s.validate().is_ok());
        let s = spec(&[("gamma", vec![1.0])]);
        assert!(matches!(s.validate(), Err(Error::UnknownParameter(_))));
        let s = spec(&[("u_th", vec![])]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn continuous_grids_hold_gradient() {
        let g = default_grids(ModelKind::Gradient, Mode::Continuous, Stage::GradientCfar);
        assert!(!g.contains_key("alpha_g") && !g.contains_key("alpha_x"));
        let g = default_grids(ModelKind::Rate, Mode::Continuous, Stage::Codec);
        assert!(g.contains_key("u_th") && !g.contains_key("tau"));
        let g = default_grids(ModelKind::Gradient, Mode::Single, Stage::GradientCfar);
        assert_eq!(g["alpha_x"].len(), ALPHA_X_GRID.len());
    }

    #[test]
    fn time_grid_stays_above_plateau() {
        let d = ModelSpec::defaults(ModelKind::Time);
        let CodecConfig::Time(p) = d.codec else { unreachable!() };
        let g = default_grids(ModelKind::Time, Mode::Single, Stage::Codec);
        let plateau = p.plateau(DEFAULT_N_SAMPLES);
        assert!(g["u_th"].iter().all(|&u| u > plateau));
        assert!(g["u_th"].windows(2).all(|w| w[0] < w[1]));
        assert!(g["u_th"].iter().any(|&u| (u - p.u_th).abs() < 1e-12));
    }

    #[test]
    fn default_grids_validate() {
        for m in ModelKind::ALL {
            for mode in Mode::ALL {
                let stages: &[Stage] = if m.is_spiking() { &[Stage::GradientCfar, Stage::Codec] } else { &[Stage::GradientCfar] };
                for &stage in stages {
                    let s = SweepSpec { model: m, mode, stage, grids: default_grids(m, mode, stage), fixed: ParamSet::new() };
                    assert!(s.validate().is_ok(), "{m} {mode:?} {stage:?}");
                }
            }
        }
    }

    #[test]
    fn bracket() {
        assert_eq!(log_bracket(0.4), vec![0.1, 0.2, 0.4, 0.8, 1.6]);
    }
}
