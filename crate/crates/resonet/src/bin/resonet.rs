//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for data errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::ThreadPool;
use resonet::experiment::{self, list_files, score_map, Dataset};
use resonet::io::{self, FrameRecord, ParamsFile, ProcessManifest, ReportFile, SCHEMA_VERSION};
use resonet::parallel::{pool, Parallel};
use resonet_core::eval::{float32_map_bits, EvalReport};
use resonet_core::pipeline::{run_frame, Mode, ModelKind, ModelSpec, ParamSet};
use resonet_core::resonator::GridConfig;
use resonet_core::signal::{make_dataset_with, synthesize, DatasetConfig, RadarParams, Recipe, DEFAULT_NOISE_STDDEV};
use resonet_core::sweep::{default_grids, Stage, SweepSpec};

#[derive(Parser)]
#[command(name = "resonet", version, about = "Resonator-grid radar processing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes and raw frames for one recipe.
    Simulate(SimulateArgs),
    /// Run a model on every frame of a dataset.
    Process(ProcessArgs),
    /// Score a model (or the output of `process`) against the scenes.
    Evaluate(EvaluateArgs),
    /// Grid search on a training dataset.
    Sweep(SweepArgs),
    /// Detection quality at checkpoints within the first chirp.
    Early(EarlyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    /// Desk-scale sensor (8 chirps) and the built-in model defaults.
    Desk,
    /// Full published sensor and model parameters.
    Paper,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_recipe)]
    recipe: Recipe,
    #[arg(long, default_value_t = 1)]
    n_scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_NOISE_STDDEV)]
    noise: f64,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    #[arg(long)]
    out: PathBuf,
    /// Replace existing scenes and frames in `--out`.
    #[arg(long)]
    force: bool,
}

/// Model selection shared by the processing commands.
/// Flags override the parameter file, which overrides the profile.
#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    mode: Option<Mode>,
    /// JSON parameter file, e.g. the `best_params.json` of a sweep.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    #[arg(long)]
    alpha_x: Option<f64>,
    #[arg(long)]
    alpha_g: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    u_th: Option<f64>,
    #[arg(long)]
    u_rest: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    cfar_alpha: Option<f64>,
    #[arg(long)]
    cfar_offset: Option<f64>,
}

#[derive(Args)]
struct ProcessArgs {
    /// Dataset directory with `frame_*.nrrf` files.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write spike streams as CSV.
    #[arg(long)]
    spikes_csv: bool,
    /// Write the final neuron state of every frame.
    #[arg(long)]
    dump_grid: bool,
    /// Worker threads (0 uses every CPU).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset directory with `scene_*.json` files.
    #[arg(long)]
    data: PathBuf,
    /// Output directory of `process`; without it the model runs here.
    #[arg(long)]
    maps: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep spec. Without it the built-in grids of `--model` are used.
    #[arg(long, conflicts_with = "model")]
    spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    model: Option<ModelKind>,
    #[arg(long, default_value = "single")]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = StageArg::GradientCfar)]
    stage: StageArg,
    /// Training dataset directory.
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    GradientCfar,
    Codec,
}

#[derive(Args)]
struct EarlyArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 64)]
    stride: usize,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

trait UsageExt<T> {
    fn usage(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> UsageExt<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(anyhow!(msg.into())))
}

fn parse_recipe(s: &str) -> Result<Recipe, String> {
    s.parse().map_err(|e: resonet_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Process(a) => process(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Early(a) => early(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn worker_pool(threads: usize) -> CliResult<ThreadPool> {
    pool(threads).usage()
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let params = match a.profile {
        Profile::Desk => RadarParams::desk(),
        Profile::Paper => RadarParams::full(),
    };
    let cfg = DatasetConfig {
        params,
        noise_stddev: a.noise,
        ..DatasetConfig::default()
    };
    let existing: Vec<PathBuf> = if a.out.is_dir() {
        let mut v = list_files(&a.out, "scene_", ".json")?;
        v.extend(list_files(&a.out, "frame_", ".nrrf")?);
        v
    } else {
        Vec::new()
    };
    if !existing.is_empty() && !a.force {
        return usage(format!(
            "{} already holds a dataset; pass --force to replace it",
            a.out.display()
        ));
    }
    let scenes = make_dataset_with(a.recipe, a.n_scenes, a.seed, &cfg).usage()?;
    ensure_dir(&a.out)?;
    for p in existing {
        fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
    }
    for (i, scene) in scenes.iter().enumerate() {
        io::save_scene(&a.out.join(format!("scene_{i:04}.json")), scene)?;
        io::save_frame(&a.out.join(format!("frame_{i:04}.nrrf")), &synthesize(scene)?)?;
    }
    println!("wrote {} scenes of {} to {}", scenes.len(), a.recipe.name(), a.out.display());
    Ok(())
}

impl ModelArgs {
    fn flag_params(&self) -> ParamSet {
        [
            ("alpha_x", self.alpha_x),
            ("alpha_g", self.alpha_g),
            ("gamma", self.gamma),
            ("u_th", self.u_th),
            ("u_rest", self.u_rest),
            ("tau", self.tau),
            ("cfar_alpha", self.cfar_alpha),
            ("cfar_offset", self.cfar_offset),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect()
    }

    /// Resolve the model. `inherited` is a lower-priority source such as a
    /// `process` manifest.
    fn resolve(&self, inherited: Option<(ModelKind, Mode, &ParamSet)>) -> CliResult<(ModelSpec, Mode)> {
        let file = match &self.params {
            Some(p) => Some(io::load_params(p).with_context(|| format!("loading {}", p.display()))?),
            None => None,
        };
        let mut kind = inherited.map(|i| i.0);
        for k in [file.as_ref().map(|f| f.model), self.model].into_iter().flatten() {
            match kind {
                Some(prev) if prev != k && inherited.is_some() => {
                    return usage(format!("model `{k}` does not match the processed model `{prev}`"));
                }
                _ => kind = Some(k),
            }
        }
        let Some(kind) = kind else {
            return usage("--model is required (or a --params file naming one)");
        };
        let mode = self
            .mode
            .or(inherited.map(|i| i.1))
            .or(file.as_ref().map(|f| f.mode))
            .unwrap_or_default();
        if let Some((_, m, _)) = inherited {
            if m != mode {
                return usage(format!("mode {mode:?} does not match the processed mode {m:?}"));
            }
        }
        let mut spec = match self.profile {
            Profile::Desk => ModelSpec::defaults(kind),
            Profile::Paper => ModelSpec::published(kind, mode),
        };
        if let Some((_, _, params)) = inherited {
            spec = spec.with_params(params)?;
        }
        if let Some(f) = &file {
            spec = spec.with_params(&f.params)?;
        }
        let spec = spec.with_params(&self.flag_params()).usage()?;
        if kind == ModelKind::Ft && mode == Mode::Continuous {
            return usage("the ft model has no continuous mode");
        }
        Ok((spec, mode))
    }
}

fn process(a: ProcessArgs) -> CliResult<()> {
    let (spec, mode) = a.model.resolve(None)?;
    let frames = list_files(&a.data, "frame_", ".nrrf")?;
    if frames.is_empty() {
        return Err(anyhow!("no frame_*.nrrf files in {}", a.data.display()).into());
    }
    let pool = worker_pool(a.threads)?;
    let exec = Parallel::new(&pool);
    ensure_dir(&a.out)?;
    let mut records = Vec::with_capacity(frames.len());
    for path in &frames {
        let frame = io::load_frame(path).with_context(|| format!("loading {}", path.display()))?;
        let out = run_frame(&frame, &spec, mode, &exec).with_context(|| format!("processing {}", path.display()))?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("frame")
            .trim_start_matches("frame_")
            .to_string();
        let map_name = format!("map_{stem}.csv");
        io::write_map_csv(io::create_file(&a.out.join(&map_name))?, &out.map)?;
        let spikes = if spec.kind.is_spiking() {
            let name = format!("spikes_{stem}.nrsp");
            let mut w = io::create_file(&a.out.join(&name))?;
            io::write_spikes_bin(&mut w, &out.spikes)?;
            std::io::Write::flush(&mut w)?;
            if a.spikes_csv {
                io::write_spikes_csv(io::create_file(&a.out.join(format!("spikes_{stem}.csv")))?, &out.spikes)?;
            }
            Some(name)
        } else {
            None
        };
        if a.dump_grid {
            if let Some(grid) = &out.grid {
                let mut w = io::create_file(&a.out.join(format!("grid_{stem}.nrrg")))?;
                io::write_grid_dump(&mut w, grid)?;
                std::io::Write::flush(&mut w)?;
            }
        }
        let bits = float32_map_bits(&GridConfig::new(frame.n_samples(), frame.n_vx()));
        records.push(FrameRecord {
            frame: path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string(),
            map: map_name,
            spikes,
            spike_count: out.spikes.len(),
            chirps_processed: out.chirps_processed,
            spikes_per_chirp: out.spikes_per_chirp(),
            bandwidth_ratio: out.spikes_per_chirp() / bits,
        });
    }
    let n = records.len();
    let mean_spikes = records.iter().map(|r| r.spikes_per_chirp).sum::<f64>() / n as f64;
    let mean_ratio = records.iter().map(|r| r.bandwidth_ratio).sum::<f64>() / n as f64;
    let manifest = ProcessManifest {
        schema_version: SCHEMA_VERSION,
        model: spec.kind,
        mode,
        params: spec.params(),
        frames: records,
    };
    io::save_json(&a.out.join("process.json"), &manifest)?;
    println!(
        "processed {n} frames with {} ({}): {mean_spikes:.1} spikes per chirp, bandwidth ratio {mean_ratio:.6}",
        spec.kind,
        mode.name()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let ds = Dataset::load_dir(&a.data)?;
    let pool = worker_pool(a.threads)?;
    let (spec, mode, report) = match &a.maps {
        None => {
            let (spec, mode) = a.model.resolve(None)?;
            let report = experiment::evaluate(&ds, &spec, mode, &pool)?;
            (spec, mode, report)
        }
        Some(dir) => {
            let manifest = io::load_manifest(&dir.join("process.json"))?;
            let (spec, mode) = a.model.resolve(Some((manifest.model, manifest.mode, &manifest.params)))?;
            if manifest.frames.len() != ds.len() {
                return Err(anyhow!(
                    "count mismatch: {} maps in {} but {} scenes in {}",
                    manifest.frames.len(),
                    dir.display(),
                    ds.len(),
                    a.data.display()
                )
                .into());
            }
            let mut scores = Vec::with_capacity(ds.len());
            for (i, rec) in manifest.frames.iter().enumerate() {
                let path = dir.join(&rec.map);
                let map = io::read_map_csv(io::open_file(&path)?).with_context(|| format!("reading {}", path.display()))?;
                scores.push(score_map(&map, &ds.labels[i], &spec.cfar, rec.spikes_per_chirp)?);
            }
            let p = &ds.scenes[0].params;
            let report = EvalReport::aggregate(scores, float32_map_bits(&GridConfig::new(p.n_samples, p.n_vx)));
            (spec, mode, report)
        }
    };
    ensure_dir(&a.out)?;
    io::write_summary_csv(io::create_file(&a.out.join("summary.csv"))?, &[(spec.kind, &report)])?;
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        model: spec.kind,
        mode,
        params: spec.params(),
        report,
    };
    io::save_json(&a.out.join("report.json"), &file)?;
    let r = &file.report;
    println!(
        "{} ({}): F {:.4}  precision {:.4}  recall {:.4}  SNR {:.5}  spikes {:.1}  bandwidth {:.6}",
        spec.kind,
        mode.name(),
        r.f_score,
        r.precision,
        r.recall,
        r.snr,
        r.spike_count,
        r.bandwidth_ratio
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let spec: SweepSpec = match (&a.spec, a.model) {
        (Some(path), _) => {
            let f = io::open_file(path)?;
            serde_json::from_reader(f).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(model)) => {
            let stage = match a.stage {
                StageArg::GradientCfar => Stage::GradientCfar,
                StageArg::Codec => Stage::Codec,
            };
            if stage == Stage::Codec && !model.is_spiking() {
                return usage(format!("model `{model}` has no codec stage"));
            }
            SweepSpec {
                model,
                mode: a.mode,
                stage,
                grids: default_grids(model, a.mode, stage),
                fixed: ParamSet::new(),
            }
        }
        (None, None) => return usage("either --spec or --model is required"),
    };
    spec.validate()?;
    let train = Dataset::load_dir(&a.train)?;
    let pool = worker_pool(a.threads)?;
    let result = experiment::run_sweep(&spec, &train, &pool)?;
    ensure_dir(&a.out)?;
    io::write_sweep_csv(io::create_file(&a.out.join("sweep.csv"))?, &result)?;
    let best = result.best();
    let params = spec.spec_for(&best.params)?.params();
    io::save_json(&a.out.join("best_params.json"), &ParamsFile::new(spec.model, spec.mode, params))?;
    println!(
        "{} points, best F {:.4} at {:?}",
        result.table.len(),
        best.score.f_score,
        best.params
    );
    Ok(())
}

fn early(a: EarlyArgs) -> CliResult<()> {
    let (spec, _) = a.model.resolve(None)?;
    if spec.kind == ModelKind::Ft {
        return usage("early detection needs a resonator model");
    }
    if a.stride == 0 {
        return usage("--stride must be positive");
    }
    let ds = Dataset::load_dir(&a.data)?;
    let n = ds.scenes[0].params.n_samples;
    if n % a.stride != 0 {
        return usage(format!("--stride {} does not divide {n} samples", a.stride));
    }
    let pool = worker_pool(a.threads)?;
    let curve = experiment::early_curve(&ds, &spec, a.stride, &pool)?;
    let write = |w: &mut dyn std::io::Write| -> anyhow::Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        for p in &curve {
            csv.serialize(p)?;
        }
        csv.flush()?;
        Ok(())
    };
    match &a.out {
        Some(path) => write(&mut io::create_file(path)?)?,
        None => write(&mut std::io::stdout().lock())?,
    }
    Ok(())
}
