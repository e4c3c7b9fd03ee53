//! CSV schemas and the run manifest. Every CSV is UTF-8 with a header on
//! line 1; floats use Rust's shortest round-trip formatting.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use noma_aoi_core::agents::{Evaluation, LearningCurve};
use noma_aoi_core::meta::MetaHistory;
use noma_aoi_core::pareto::{Front, ParetoPoint, PolicyTag, TrainingCost};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Bumped whenever a CSV column is added, removed or reinterpreted.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CONFIG_FILE: &str = "config.toml";

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_records(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(|e| Error::csv(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub reward: f64,
    pub running_mean: f64,
}

pub fn write_learning_curve(path: &Path, curve: &LearningCurve) -> Result<()> {
    let rows = curve
        .rewards
        .iter()
        .zip(curve.running_mean())
        .enumerate()
        .map(|(episode, (&reward, running_mean))| CurveRow { episode, reward, running_mean });
    write_rows(path, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub zeta: f64,
    pub avg_aoi: f64,
    pub avg_power: f64,
    pub dominated: bool,
    pub tag: PolicyTag,
    pub seed: u64,
}

impl From<&ParetoPoint> for FrontRow {
    fn from(p: &ParetoPoint) -> Self {
        Self { zeta: p.zeta, avg_aoi: p.avg_aoi, avg_power: p.avg_power, dominated: p.dominated, tag: p.tag, seed: p.seed }
    }
}

pub fn write_front(path: &Path, front: &Front) -> Result<()> {
    write_rows(path, front.points.iter().map(FrontRow::from))
}

pub fn read_front(path: &Path) -> Result<Vec<FrontRow>> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypervolumeRow {
    pub tag: PolicyTag,
    pub hypervolume: f64,
    pub stderr: f64,
    pub samples: usize,
    pub ref_aoi: f64,
    pub ref_power: f64,
    pub points: usize,
    pub non_dominated: usize,
    pub seed: u64,
}

impl HypervolumeRow {
    pub fn from_front(front: &Front, seed: u64) -> Self {
        let hv = &front.hypervolume;
        Self {
            tag: front.tag,
            hypervolume: hv.value,
            stderr: hv.stderr,
            samples: hv.samples,
            ref_aoi: hv.reference.0,
            ref_power: hv.reference.1,
            points: front.points.len(),
            non_dominated: front.points.iter().filter(|p| !p.dominated).count(),
            seed,
        }
    }
}

pub fn write_hypervolume(path: &Path, rows: &[HypervolumeRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_hypervolume(path: &Path) -> Result<Vec<HypervolumeRow>> {
    read_rows(path)
}

/// One cell of an objective-vs-parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep: String,
    pub value: String,
    pub tag: PolicyTag,
    pub zeta: f64,
    pub avg_aoi: f64,
    pub avg_power: f64,
    pub objective: f64,
    pub objective_stderr: f64,
    pub seed: u64,
}

impl SweepRow {
    pub fn new(sweep: &str, value: impl ToString, tag: PolicyTag, eval: &Evaluation, seed: u64) -> Self {
        Self {
            sweep: sweep.to_string(),
            value: value.to_string(),
            tag,
            zeta: eval.mean.zeta,
            avg_aoi: eval.mean.avg_aoi,
            avg_power: eval.mean.avg_power,
            objective: eval.mean.objective,
            objective_stderr: eval.objective_stderr,
            seed,
        }
    }
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub episode: usize,
    pub tag: PolicyTag,
    pub zeta: f64,
    pub avg_aoi: f64,
    pub avg_power: f64,
    pub objective: f64,
}

pub fn write_evaluation(path: &Path, tag: PolicyTag, eval: &Evaluation) -> Result<()> {
    let rows = eval.episodes.iter().enumerate().map(|(episode, p)| EvalRow {
        episode,
        tag,
        zeta: p.zeta,
        avg_aoi: p.avg_aoi,
        avg_power: p.avg_power,
        objective: p.objective,
    });
    write_rows(path, rows)
}

pub fn read_evaluation(path: &Path) -> Result<Vec<EvalRow>> {
    read_rows(path)
}

/// Per-slot record of one greedy episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub slot: usize,
    pub order: Vec<usize>,
    pub alpha: Vec<f64>,
    pub reward: f64,
    pub slot_power: f64,
    pub delivered: usize,
    /// Σ_i r Δ per process after the slot.
    pub process_aoi: Vec<f64>,
}

fn joined<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_trace(path: &Path, processes: usize, rows: &[TraceRow]) -> Result<()> {
    let mut header: Vec<String> =
        ["slot", "order", "alpha", "reward", "slot_power", "delivered"].iter().map(|s| s.to_string()).collect();
    header.extend((0..processes).map(|l| format!("aoi_{l}")));
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut rec = vec![
                r.slot.to_string(),
                joined(&r.order),
                joined(&r.alpha),
                r.reward.to_string(),
                r.slot_power.to_string(),
                r.delivered.to_string(),
            ];
            rec.extend(r.process_aoi.iter().map(f64::to_string));
            rec
        })
        .collect();
    write_records(path, &header, &records)
}

pub fn write_meta_history(path: &Path, history: &MetaHistory) -> Result<()> {
    let header = ["iteration", "zetas", "grad_norm"].map(String::from);
    let records: Vec<Vec<String>> = history
        .zetas
        .iter()
        .zip(&history.grad_norms)
        .enumerate()
        .map(|(k, (z, g))| vec![k.to_string(), joined(z), g.to_string()])
        .collect();
    write_records(path, &header, &records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub points: usize,
    pub meta_total: usize,
    pub hybrid_total: usize,
    pub ratio: f64,
}

pub fn write_training_cost(path: &Path, costs: &[TrainingCost]) -> Result<()> {
    write_rows(
        path,
        costs.iter().map(|c| CostRow { points: c.points, meta_total: c.meta_total, hybrid_total: c.hybrid_total, ratio: c.ratio() }),
    )
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    Sha256::digest(config.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub csv_schema_version: u32,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// A run directory being filled. Artifacts are registered as they are
/// written; `finish` stores the resolved config and the manifest.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    command: String,
    seed: u64,
    started: u64,
    artifacts: Vec<String>,
}

impl RunDir {
    /// Refuses a directory that already holds a manifest: manifests are
    /// never rewritten.
    pub fn create(root: &Path, command: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let manifest = root.join(MANIFEST_FILE);
        if manifest.exists() {
            return Err(Error::Format { path: manifest, reason: "run directory already holds a manifest".into() });
        }
        Ok(Self { root: root.to_path_buf(), command: command.to_string(), seed, started: unix_now(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Registers `name` and returns its full path.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.root.join(name)
    }

    pub fn finish(self, config: &ExperimentConfig) -> Result<RunManifest> {
        let cfg_path = self.root.join(CONFIG_FILE);
        std::fs::write(&cfg_path, config.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
        let mut artifacts = self.artifacts;
        artifacts.push(CONFIG_FILE.to_string());
        let manifest = RunManifest {
            command: self.command,
            config_hash: config_hash(config),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            seed: self.seed,
            started_unix: self.started,
            finished_unix: unix_now(),
            artifacts,
        };
        let path = self.root.join(MANIFEST_FILE);
        let text = toml::to_string(&manifest).expect("manifest is representable as TOML");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::Format { path, reason: e.message().trim().to_string() })
}
