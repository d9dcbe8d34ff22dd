//! Dataset-level evaluation, parameter sweeps and early-detection curves.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use rayon::ThreadPool;
use resonet_core::cfar::{detect_with_means, neighbour_means, CfarConfig};
use resonet_core::dft::RangeAngleMap;
use resonet_core::eval::{
    self, early_detection_curve, float32_map_bits, label_bins, score, snr_adjusted, BinLabel, Checkpoint, Counts,
    EvalReport, SceneScore, DEFAULT_MATCH_RADIUS,
};
use resonet_core::pipeline::{run_frame, FrameOutput, Mode, ModelKind, ModelSpec, ParamSet, Sequential, CFAR_PARAMS};
use resonet_core::signal::{make_dataset_with, synthesize, ChirpFrame, DatasetConfig, Recipe, Scene};
use resonet_core::sweep::{self, ScoredPoint, Stage, SweepResult, SweepSpec};
use resonet_core::{Error, Result};

use crate::io;
use crate::parallel::par_map;

/// Where the raw frames of a dataset come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    /// Synthesised from the scene on demand.
    Synthesize,
    /// One frame file per scene.
    Files(Vec<PathBuf>),
}

/// Scenes with their ground-truth bins. Frames are produced on demand so a
/// dataset never holds more than one frame per worker in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub labels: Vec<BinLabel>,
    pub frames: FrameSource,
}

impl Dataset {
    pub fn from_scenes(scenes: Vec<Scene>) -> Result<Self> {
        let labels = scenes
            .iter()
            .map(|s| {
                let p = &s.params;
                label_bins(s, &resonet_core::resonator::GridConfig::new(p.n_samples, p.n_vx))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scenes,
            labels,
            frames: FrameSource::Synthesize,
        })
    }

    /// Load `scene_NNNN.json` files from `dir`, paired with the matching
    /// `frame_NNNN.nrrf` files when every scene has one.
    pub fn load_dir(dir: &Path) -> anyhow::Result<Self> {
        let scene_files = list_files(dir, "scene_", ".json")?;
        if scene_files.is_empty() {
            bail!("no scene_*.json files in {}", dir.display());
        }
        let scenes = scene_files.iter().map(|p| io::load_scene(p)).collect::<Result<Vec<_>, _>>()?;
        let frame_files: Vec<PathBuf> = scene_files.iter().map(|p| frame_path_for(p)).collect();
        let present = frame_files.iter().filter(|p| p.exists()).count();
        let mut ds = Self::from_scenes(scenes)?;
        if present == frame_files.len() {
            ds.frames = FrameSource::Files(frame_files);
        } else if present != 0 {
            bail!("{} has frames for {present} of {} scenes", dir.display(), frame_files.len());
        }
        Ok(ds)
    }

    /// Raw frame of scene `i`.
    pub fn frame(&self, i: usize) -> anyhow::Result<ChirpFrame> {
        match &self.frames {
            FrameSource::Synthesize => Ok(synthesize(&self.scenes[i])?),
            FrameSource::Files(paths) => Ok(io::load_frame(&paths[i])?),
        }
    }

    /// The first `n` scenes.
    pub fn truncate(&mut self, n: usize) {
        self.scenes.truncate(n);
        self.labels.truncate(n);
        if let FrameSource::Files(p) = &mut self.frames {
            p.truncate(n);
        }
    }

    /// `n_per_recipe` scenes of every recipe, recipes in the given order.
    pub fn generate(recipes: &[Recipe], n_per_recipe: usize, seed: u64, cfg: &DatasetConfig) -> Result<Self> {
        let mut scenes = Vec::new();
        for r in recipes {
            scenes.extend(make_dataset_with(*r, n_per_recipe, seed, cfg)?);
        }
        Self::from_scenes(scenes)
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Files in `dir` named `<prefix>…<suffix>`, sorted by name.
pub fn list_files(dir: &Path, prefix: &str, suffix: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with(prefix) && name.ends_with(suffix) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// `frame_NNNN.nrrf` next to `scene_NNNN.json`.
pub fn frame_path_for(scene: &Path) -> PathBuf {
    let name = scene.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let stem = name.trim_start_matches("scene_").trim_end_matches(".json");
    scene.with_file_name(format!("frame_{stem}.nrrf"))
}

/// Detection quality of one map.
pub fn score_map(map: &RangeAngleMap, labels: &BinLabel, cfar: &CfarConfig, spikes: f64) -> Result<SceneScore> {
    let det = resonet_core::cfar::ca_cfar(map, cfar)?;
    let counts = score(&det, labels, DEFAULT_MATCH_RADIUS);
    Ok(SceneScore::new(counts, labels.len(), snr_adjusted(map, labels), spikes))
}

/// Process and score one scene.
pub fn evaluate_scene(ds: &Dataset, i: usize, spec: &ModelSpec, mode: Mode) -> anyhow::Result<(SceneScore, FrameOutput)> {
    let frame = ds.frame(i)?;
    let out = run_frame(&frame, spec, mode, &Sequential)?;
    let s = score_map(&out.map, &ds.labels[i], &spec.cfar, out.spikes_per_chirp())?;
    Ok((s, out))
}

fn map_bits(ds: &Dataset) -> f64 {
    ds.scenes
        .first()
        .map(|s| float32_map_bits(&resonet_core::resonator::GridConfig::new(s.params.n_samples, s.params.n_vx)))
        .unwrap_or(0.0)
}

/// Evaluate a model on every scene, scenes in parallel.
pub fn evaluate(ds: &Dataset, spec: &ModelSpec, mode: Mode, pool: &ThreadPool) -> anyhow::Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset").into());
    }
    let scores = par_map(pool, &ds.indices(), |&i| evaluate_scene(ds, i, spec, mode).map(|(s, _)| s))
        .into_iter()
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(EvalReport::aggregate(scores, map_bits(ds)))
}

fn aggregate_counts(per_scene: &[Counts]) -> sweep::Score {
    let n = per_scene.len().max(1) as f64;
    let precision = per_scene.iter().map(Counts::precision).sum::<f64>() / n;
    let recall = per_scene.iter().map(Counts::recall).sum::<f64>() / n;
    sweep::Score {
        f_score: eval::f_score(precision, recall),
        precision,
        recall,
    }
}

/// Run a sweep on `train`.
///
/// Points that differ only in detector parameters share their maps, so each
/// distinct model configuration is processed once and the detector is swept
/// on cached neighbourhood means. The table is identical to evaluating
/// every point from scratch in grid order.
pub fn run_sweep(spec: &SweepSpec, train: &Dataset, pool: &ThreadPool) -> anyhow::Result<SweepResult> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training dataset").into());
    }
    let points = spec.points();
    let mut groups: BTreeMap<Vec<(String, u64)>, Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let key = p
            .iter()
            .filter(|(k, _)| !CFAR_PARAMS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.to_bits()))
            .collect();
        groups.entry(key).or_default().push(i);
    }

    let mut scores = vec![sweep::Score::default(); points.len()];
    for members in groups.values() {
        let model = spec.spec_for(&points[members[0]])?;
        let cached = par_map(pool, &train.indices(), |&i| -> anyhow::Result<(RangeAngleMap, Vec<f64>)> {
            let frame = train.frame(i)?;
            let out = run_frame(&frame, &model, spec.mode, &Sequential)?;
            let means = neighbour_means(&out.map)?;
            Ok((out.map, means))
        })
        .into_iter()
        .collect::<anyhow::Result<Vec<_>>>()?;
        for &pi in members {
            let cfar = spec.spec_for(&points[pi])?.cfar;
            let counts: Vec<Counts> = cached
                .iter()
                .zip(&train.labels)
                .map(|((map, means), labels)| score(&detect_with_means(map, means, &cfar), labels, DEFAULT_MATCH_RADIUS))
                .collect();
            scores[pi] = aggregate_counts(&counts);
        }
    }
    let table = points
        .into_iter()
        .zip(scores)
        .map(|(params, score)| ScoredPoint { params, score })
        .collect();
    Ok(sweep::finish(spec, table)?)
}

/// Outcome of tuning every model for one chirp mode.
#[derive(Debug, Clone)]
pub struct Tuning {
    pub mode: Mode,
    pub specs: BTreeMap<ModelKind, ModelSpec>,
    pub sweeps: Vec<SweepResult>,
}

/// Two-stage tuning from the built-in defaults: the gradient model fixes
/// `alpha_x`, `alpha_g` and its detector; every spiking model then sweeps
/// its codec (and detector) with the gradient estimation held. The FT
/// baseline only sweeps its detector.
pub fn tune_all(mode: Mode, train: &Dataset, pool: &ThreadPool) -> anyhow::Result<Tuning> {
    let start = ModelKind::ALL.into_iter().map(|k| (k, ModelSpec::defaults(k))).collect();
    tune_from(&start, &ModelKind::ALL, mode, train, pool)
}

/// Two-stage tuning of `models` with grids centred on `start`. Parameters a
/// grid does not cover keep their `start` value. The gradient model is
/// always tuned since its winner feeds the codec stage.
pub fn tune_from(
    start: &BTreeMap<ModelKind, ModelSpec>,
    models: &[ModelKind],
    mode: Mode,
    train: &Dataset,
    pool: &ThreadPool,
) -> anyhow::Result<Tuning> {
    let start_of = |k: ModelKind| start.get(&k).copied().unwrap_or_else(|| ModelSpec::defaults(k));
    let mut specs = BTreeMap::new();
    let mut sweeps = Vec::new();
    let mut tune = |spec: &ModelSpec, stage: Stage, held: &ParamSet| -> anyhow::Result<ModelSpec> {
        let grids = sweep::grids_around(spec, mode, stage);
        let mut fixed = spec.params();
        fixed.extend(held.clone());
        fixed.retain(|k, _| !grids.contains_key(k));
        let s = SweepSpec { model: spec.kind, mode, stage, grids, fixed };
        let r = run_sweep(&s, train, pool)?;
        let best = s.spec_for(&r.best().params)?;
        sweeps.push(r);
        Ok(best)
    };
    if mode != Mode::Continuous && models.contains(&ModelKind::Ft) {
        specs.insert(ModelKind::Ft, tune(&start_of(ModelKind::Ft), Stage::GradientCfar, &ParamSet::new())?);
    }
    let gradient = tune(&start_of(ModelKind::Gradient), Stage::GradientCfar, &ParamSet::new())?;
    specs.insert(ModelKind::Gradient, gradient);
    let held: ParamSet = [("alpha_x", gradient.alpha_x), ("alpha_g", gradient.alpha_g)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    for kind in [ModelKind::Adaptive, ModelKind::Rate, ModelKind::Time] {
        if !models.contains(&kind) {
            continue;
        }
        specs.insert(kind, tune(&start_of(kind), Stage::Codec, &held)?);
    }
    Ok(Tuning { mode, specs, sweeps })
}

/// Scene-averaged detection quality at one early-detection checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CurvePoint {
    pub sample: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub norm_precision: f64,
    pub norm_recall: f64,
    pub norm_f_score: f64,
}

/// Early-detection curve averaged over scenes and normalised by the final
/// checkpoint.
pub fn early_curve(ds: &Dataset, spec: &ModelSpec, stride: usize, pool: &ThreadPool) -> anyhow::Result<Vec<CurvePoint>> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset").into());
    }
    let per_scene = par_map(pool, &ds.indices(), |&i| -> anyhow::Result<Vec<Checkpoint>> {
        let frame = ds.frame(i)?;
        Ok(early_detection_curve(&frame, spec, &ds.labels[i], stride, DEFAULT_MATCH_RADIUS, &Sequential)?)
    })
    .into_iter()
    .collect::<anyhow::Result<Vec<_>>>()?;
    let n_points = per_scene[0].len();
    let n = per_scene.len() as f64;
    let averaged: Vec<Checkpoint> = (0..n_points)
        .map(|c| {
            let precision = per_scene.iter().map(|s| s[c].precision).sum::<f64>() / n;
            let recall = per_scene.iter().map(|s| s[c].recall).sum::<f64>() / n;
            Checkpoint {
                sample: per_scene[0][c].sample,
                counts: Counts::default(),
                precision,
                recall,
                f_score: eval::f_score(precision, recall),
            }
        })
        .collect();
    let norm = eval::normalize_curve(&averaged);
    Ok(averaged
        .iter()
        .zip(norm)
        .map(|(c, (np, nr, nf))| CurvePoint {
            sample: c.sample,
            precision: c.precision,
            recall: c.recall,
            f_score: c.f_score,
            norm_precision: np,
            norm_recall: nr,
            norm_f_score: nf,
        })
        .collect())
}
