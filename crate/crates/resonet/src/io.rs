//! On-disk formats.
//!
//! Binary files are little-endian and start with a four-byte magic and a
//! `u16` version:
//!
//! * `NRRF` raw frame: `n_chirps`, `n_samples`, `n_vx` as `u32`, then `f32`
//!   pairs `(re, im)` in `[chirp][sample][antenna]` order.
//! * `NRRG` grid snapshot: `n_range_bins`, `n_angle_bins`, `n_fields` as
//!   `u32`, then per neuron (row-major) the `f32` fields
//!   `g, s_max, w_max, |s|`.
//! * `NRSP` spike stream: `count` as `u32`, then per event `u16 chirp`,
//!   `u16 sample`, `u16 range_bin`, `u16 angle_bin`, `i8 polarity`.
//!
//! Text formats are CSV with a header row and JSON documents carrying a
//! `schema_version`.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use resonet_core::Complex64;
use resonet_core::codec::{Polarity, SpikeEvent};
use resonet_core::dft::RangeAngleMap;
use resonet_core::cfar::DetectionMap;
use resonet_core::eval::EvalReport;
use resonet_core::pipeline::{Mode, ModelKind, ParamSet};
use resonet_core::resonator::Grid;
use resonet_core::signal::{ChirpFrame, Scene};
use resonet_core::sweep::SweepResult;
use serde::{Deserialize, Serialize};

pub const FRAME_MAGIC: &[u8; 4] = b"NRRF";
pub const GRID_MAGIC: &[u8; 4] = b"NRRG";
pub const SPIKE_MAGIC: &[u8; 4] = b"NRSP";
pub const FORMAT_VERSION: u16 = 1;
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Stream(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("invalid JSON")]
    Json(#[from] serde_json::Error),
    #[error("invalid CSV")]
    Csv(#[from] csv::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] resonet_core::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&m).into_owned(),
        });
    }
    let v = read_u16(r)?;
    if v != FORMAT_VERSION {
        return Err(FormatError::Version(v));
    }
    Ok(())
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4]) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())
}

fn read_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> io::Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| FormatError::Schema(format!("{what} = {v} does not fit in 32 bits")))
}

// ---- frames ----------------------------------------------------------------

pub fn write_frame<W: Write>(w: &mut W, frame: &ChirpFrame) -> Result<()> {
    write_header(w, FRAME_MAGIC)?;
    for v in [frame.n_chirps(), frame.n_samples(), frame.n_vx()] {
        w.write_all(&to_u32(v, "frame dimension")?.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(frame.as_slice().len() * 8);
    for x in frame.as_slice() {
        buf.extend_from_slice(&(x.re as f32).to_le_bytes());
        buf.extend_from_slice(&(x.im as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<ChirpFrame> {
    read_header(r, FRAME_MAGIC)?;
    let n_chirps = read_u32(r)? as usize;
    let n_samples = read_u32(r)? as usize;
    let n_vx = read_u32(r)? as usize;
    let len = n_chirps
        .checked_mul(n_samples)
        .and_then(|v| v.checked_mul(n_vx))
        .ok_or_else(|| FormatError::Schema("frame dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    r.take(len as u64 * 8).read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(FormatError::Schema(format!(
            "frame truncated: expected {} bytes of samples, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
    let samples = bytes.chunks_exact(8).map(|c| Complex64::new(f(&c[..4]), f(&c[4..]))).collect();
    Ok(ChirpFrame::from_vec(n_chirps, n_samples, n_vx, samples)?)
}

pub fn save_frame(path: &Path, frame: &ChirpFrame) -> Result<()> {
    let mut w = create(path)?;
    write_frame(&mut w, frame)?;
    w.flush()?;
    Ok(())
}

pub fn load_frame(path: &Path) -> Result<ChirpFrame> {
    read_frame(&mut open(path)?)
}

/// Round every sample through `f32`, as a frame file would.
pub fn quantize_frame(frame: &ChirpFrame) -> ChirpFrame {
    let mut out = frame.clone();
    for x in out.as_mut_slice() {
        *x = Complex64::new(x.re as f32 as f64, x.im as f32 as f64);
    }
    out
}

// ---- scenes ----------------------------------------------------------------

pub fn save_scene(path: &Path, scene: &Scene) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, scene)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let scene: Scene = serde_json::from_reader(open(path)?)?;
    scene.validate()?;
    Ok(scene)
}

// ---- grid snapshots --------------------------------------------------------

const GRID_FIELDS: [&str; 4] = ["g", "s_max", "w_max", "abs_s"];

fn grid_rows(grid: &Grid) -> impl Iterator<Item = (usize, usize, [f64; 4])> + '_ {
    let n_angle = grid.config().n_angle_bins;
    grid.neurons()
        .iter()
        .enumerate()
        .map(move |(i, n)| (i / n_angle, i % n_angle, [n.g, n.s_max, n.w_max, n.s.norm()]))
}

pub fn write_grid_dump<W: Write>(w: &mut W, grid: &Grid) -> Result<()> {
    let cfg = grid.config();
    write_header(w, GRID_MAGIC)?;
    for v in [cfg.n_range_bins, cfg.n_angle_bins, GRID_FIELDS.len()] {
        w.write_all(&to_u32(v, "grid dimension")?.to_le_bytes())?;
    }
    for (_, _, fields) in grid_rows(grid) {
        for v in fields {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Grid dump contents: `(n_range_bins, n_angle_bins, fields per neuron)`.
pub type GridDump = (usize, usize, Vec<[f32; 4]>);

pub fn read_grid_dump<R: Read>(r: &mut R) -> Result<GridDump> {
    read_header(r, GRID_MAGIC)?;
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    let fields = read_u32(r)? as usize;
    if fields != GRID_FIELDS.len() {
        return Err(FormatError::Schema(format!("expected 4 fields per neuron, found {fields}")));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        out.push([read_f32(r)?, read_f32(r)?, read_f32(r)?, read_f32(r)?]);
    }
    Ok((rows, cols, out))
}

pub fn write_grid_csv<W: Write>(w: W, grid: &Grid) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["range_bin", "angle_bin", "g", "s_max", "w_max", "abs_s"])?;
    for (r, a, f) in grid_rows(grid) {
        csv.write_record([r.to_string(), a.to_string(), f[0].to_string(), f[1].to_string(), f[2].to_string(), f[3].to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

// ---- spikes ----------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct SpikeRecord {
    chirp: u32,
    sample: u32,
    range_bin: u16,
    angle_bin: u16,
    polarity: i8,
}

impl From<&SpikeEvent> for SpikeRecord {
    fn from(e: &SpikeEvent) -> Self {
        Self {
            chirp: e.chirp,
            sample: e.sample,
            range_bin: e.range_bin,
            angle_bin: e.angle_bin,
            polarity: e.polarity.as_i8(),
        }
    }
}

impl TryFrom<SpikeRecord> for SpikeEvent {
    type Error = FormatError;

    fn try_from(r: SpikeRecord) -> Result<Self> {
        let polarity = Polarity::from_i8(r.polarity)
            .ok_or_else(|| FormatError::Schema(format!("polarity must be 1 or -1, found {}", r.polarity)))?;
        Ok(SpikeEvent {
            chirp: r.chirp,
            sample: r.sample,
            range_bin: r.range_bin,
            angle_bin: r.angle_bin,
            polarity,
        })
    }
}

pub fn write_spikes_csv<W: Write>(w: W, events: &[SpikeEvent]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for e in events {
        csv.serialize(SpikeRecord::from(e))?;
    }
    if events.is_empty() {
        csv.write_record(["chirp", "sample", "range_bin", "angle_bin", "polarity"])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_spikes_csv<R: Read>(r: R) -> Result<Vec<SpikeEvent>> {
    let mut csv = csv::Reader::from_reader(r);
    csv.deserialize::<SpikeRecord>()
        .map(|rec| SpikeEvent::try_from(rec?))
        .collect()
}

/// Bytes per record of the packed spike stream.
pub const SPIKE_RECORD_BYTES: usize = 9;

pub fn write_spikes_bin<W: Write>(w: &mut W, events: &[SpikeEvent]) -> Result<()> {
    write_header(w, SPIKE_MAGIC)?;
    w.write_all(&to_u32(events.len(), "spike count")?.to_le_bytes())?;
    let mut buf = Vec::with_capacity(events.len() * SPIKE_RECORD_BYTES);
    for e in events {
        let narrow = |v: u32, what: &str| {
            u16::try_from(v).map_err(|_| FormatError::Schema(format!("{what} {v} does not fit in 16 bits")))
        };
        buf.extend_from_slice(&narrow(e.chirp, "chirp")?.to_le_bytes());
        buf.extend_from_slice(&narrow(e.sample, "sample")?.to_le_bytes());
        buf.extend_from_slice(&e.range_bin.to_le_bytes());
        buf.extend_from_slice(&e.angle_bin.to_le_bytes());
        buf.push(e.polarity.as_i8() as u8);
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_spikes_bin<R: Read>(r: &mut R) -> Result<Vec<SpikeEvent>> {
    read_header(r, SPIKE_MAGIC)?;
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    let mut rec = [0u8; SPIKE_RECORD_BYTES];
    for _ in 0..count {
        r.read_exact(&mut rec)?;
        let u = |i: usize| u16::from_le_bytes([rec[i], rec[i + 1]]);
        out.push(SpikeEvent::try_from(SpikeRecord {
            chirp: u(0) as u32,
            sample: u(2) as u32,
            range_bin: u(4),
            angle_bin: u(6),
            polarity: rec[8] as i8,
        })?);
    }
    Ok(out)
}

// ---- maps and detections ---------------------------------------------------

pub fn write_map_csv<W: Write>(w: W, map: &RangeAngleMap) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["range_bin", "angle_bin", "value"])?;
    let (_, cols) = map.shape();
    for (i, v) in map.values().iter().enumerate() {
        csv.write_record([(i / cols).to_string(), (i % cols).to_string(), v.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Read a dense map CSV; every cell must appear exactly once.
pub fn read_map_csv<R: Read>(r: R) -> Result<RangeAngleMap> {
    #[derive(Deserialize)]
    struct Row {
        range_bin: usize,
        angle_bin: usize,
        value: f64,
    }
    let mut csv = csv::Reader::from_reader(r);
    let rows = csv.deserialize::<Row>().collect::<std::result::Result<Vec<_>, _>>()?;
    let n_range = rows.iter().map(|r| r.range_bin + 1).max().unwrap_or(0);
    let n_angle = rows.iter().map(|r| r.angle_bin + 1).max().unwrap_or(0);
    if rows.len() != n_range * n_angle {
        return Err(FormatError::Schema(format!(
            "map has {} rows, expected {n_range}×{n_angle}",
            rows.len()
        )));
    }
    let mut seen = vec![false; rows.len()];
    let mut values = vec![0.0; rows.len()];
    for r in rows {
        let i = r.range_bin * n_angle + r.angle_bin;
        if std::mem::replace(&mut seen[i], true) {
            return Err(FormatError::Schema(format!("cell ({}, {}) repeated", r.range_bin, r.angle_bin)));
        }
        values[i] = r.value;
    }
    Ok(RangeAngleMap::from_vec(n_range, n_angle, values)?)
}

pub fn write_detections_csv<W: Write>(w: W, det: &DetectionMap) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["range_bin", "angle_bin"])?;
    for (r, a) in det.hit_bins() {
        csv.write_record([r.to_string(), a.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

// ---- parameters, reports, sweeps -------------------------------------------

/// Parameter file consumed by `process`, produced by `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub schema_version: u32,
    pub model: ModelKind,
    #[serde(default)]
    pub mode: Mode,
    pub params: ParamSet,
}

impl ParamsFile {
    pub fn new(model: ModelKind, mode: Mode, params: ParamSet) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model,
            mode,
            params,
        }
    }
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(FormatError::Schema(format!(
            "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<ParamsFile> {
    let p: ParamsFile = serde_json::from_reader(open(path)?)?;
    check_schema(p.schema_version)?;
    for name in p.params.keys() {
        if !resonet_core::pipeline::PARAM_NAMES.contains(&name.as_str()) {
            return Err(resonet_core::Error::UnknownParameter(name.clone()).into());
        }
    }
    Ok(p)
}

/// Index written by `process` next to its maps and spike streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessManifest {
    pub schema_version: u32,
    pub model: ModelKind,
    pub mode: Mode,
    pub params: ParamSet,
    pub frames: Vec<FrameRecord>,
}

/// Outputs and spike accounting of one processed frame. File names are
/// relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: String,
    pub map: String,
    pub spikes: Option<String>,
    pub spike_count: usize,
    pub chirps_processed: usize,
    pub spikes_per_chirp: f64,
    pub bandwidth_ratio: f64,
}

pub fn load_manifest(path: &Path) -> Result<ProcessManifest> {
    let m: ProcessManifest = serde_json::from_reader(open(path)?)?;
    check_schema(m.schema_version)?;
    Ok(m)
}

/// Evaluation report of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub model: ModelKind,
    pub mode: Mode,
    pub params: ParamSet,
    pub report: EvalReport,
}

pub fn load_report(path: &Path) -> Result<ReportFile> {
    let r: ReportFile = serde_json::from_reader(open(path)?)?;
    check_schema(r.schema_version)?;
    Ok(r)
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[(ModelKind, &EvalReport)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["model", "f_score", "precision", "recall", "snr", "avg_spikes", "bandwidth_ratio"])?;
    for (m, r) in rows {
        csv.write_record([
            m.name().to_string(),
            format!("{:.4}", r.f_score),
            format!("{:.4}", r.precision),
            format!("{:.4}", r.recall),
            format!("{:.5}", r.snr),
            format!("{:.1}", r.spike_count),
            format!("{:.6}", r.bandwidth_ratio),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, result: &SweepResult) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let names: Vec<&String> = result.table.first().map(|p| p.params.keys().collect()).unwrap_or_default();
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    header.extend(["f_score", "precision", "recall"].map(String::from));
    csv.write_record(&header)?;
    for p in &result.table {
        let mut row: Vec<String> = names.iter().map(|n| p.params[*n].to_string()).collect();
        row.extend([p.score.f_score, p.score.precision, p.score.recall].map(|v| v.to_string()));
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Write `contents` to `path` via [`create`], mapping errors to the path.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    create(path)
}

pub fn open_file(path: &Path) -> Result<BufReader<File>> {
    open(path)
}
