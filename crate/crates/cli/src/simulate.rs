//! The `simulate` sweep: one result directory per scheduler/policy/seed cell.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use flexsched::metrics::{app_metrics, summary_report};
use flexsched::workload::{generate, read_trace, write_trace_to};
use flexsched::{run, ClusterSpec, RequestSpec, SchedulerConfig, SimResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const APPS_FILE: &str = "apps.csv";
pub const REJECTED_FILE: &str = "rejected.csv";
pub const SERIES_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const META_FILE: &str = "meta.json";
pub const ERROR_FILE: &str = "error.txt";

/// A prepared request list and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadInfo {
    /// `trace` or `generated`.
    pub source: String,
    pub trace: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_requests: usize,
    /// SHA-256 of the request list in trace CSV form.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub label: String,
    pub scheduler: String,
    pub policy: String,
    pub preemption: bool,
    pub cluster: ClusterSpec,
    pub workload: WorkloadInfo,
    pub completed: usize,
    pub rejected: usize,
    pub makespan: f64,
}

pub struct Workload {
    pub info: WorkloadInfo,
    pub requests: Vec<RequestSpec>,
}

pub fn checksum(requests: &[RequestSpec]) -> Result<String> {
    let mut bytes = Vec::new();
    write_trace_to(&mut bytes, requests)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Loads the trace once, or generates one workload per seed.
pub fn prepare_workloads(config: &ExperimentConfig, cluster: &ClusterSpec) -> Result<Vec<Arc<Workload>>> {
    if let Some(path) = &config.workload.trace {
        let requests = read_trace(path).with_context(|| format!("reading trace {}", path.display()))?;
        let info = WorkloadInfo {
            source: "trace".into(),
            trace: Some(path.clone()),
            seed: None,
            n_requests: requests.len(),
            checksum: checksum(&requests)?,
        };
        return Ok(vec![Arc::new(Workload { info, requests })]);
    }
    let base = config.workload_spec();
    config
        .seeds
        .iter()
        .map(|seed| {
            let spec = flexsched::workload::WorkloadSpec { seed: *seed, ..base.clone() };
            let requests = generate(&spec, cluster).with_context(|| format!("generating workload for seed {seed}"))?;
            let info = WorkloadInfo {
                source: "generated".into(),
                trace: None,
                seed: Some(*seed),
                n_requests: requests.len(),
                checksum: checksum(&requests)?,
            };
            Ok(Arc::new(Workload { info, requests }))
        })
        .collect()
}

pub fn scheduler_dir(config: &SchedulerConfig) -> String {
    if config.preemption {
        format!("{}+preempt", config.kind)
    } else {
        config.kind.to_string()
    }
}

pub fn cell_dir(out: &Path, config: &SchedulerConfig, workload: &WorkloadInfo) -> PathBuf {
    let leaf = match workload.seed {
        Some(seed) => format!("seed-{seed}"),
        None => "trace".to_owned(),
    };
    out.join(scheduler_dir(config)).join(config.policy.to_string()).join(leaf)
}

pub struct Cell {
    pub config: SchedulerConfig,
    pub workload: Arc<Workload>,
    pub dir: PathBuf,
}

#[derive(Debug)]
pub struct CellOutcome {
    pub dir: PathBuf,
    pub error: Option<String>,
}

pub fn plan(config: &ExperimentConfig, workloads: &[Arc<Workload>]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for sched in config.scheduler_configs() {
        for workload in workloads {
            cells.push(Cell { config: sched, dir: cell_dir(&config.out, &sched, &workload.info), workload: workload.clone() });
        }
    }
    cells
}

/// Runs every cell, in parallel, and writes its outputs. A failing cell
/// leaves an `error.txt` in its directory; the others still complete.
pub fn run_cells(cells: &[Cell], cluster: &ClusterSpec) -> Vec<CellOutcome> {
    cells
        .par_iter()
        .map(|cell| {
            let error = run_cell(cell, cluster).err().map(|e| format!("{e:#}"));
            match &error {
                None => log::info!("{}: done", cell.dir.display()),
                Some(e) => log::error!("{}: {e}", cell.dir.display()),
            }
            CellOutcome { dir: cell.dir.clone(), error }
        })
        .collect()
}

fn run_cell(cell: &Cell, cluster: &ClusterSpec) -> Result<()> {
    fs::create_dir_all(&cell.dir).with_context(|| format!("creating {}", cell.dir.display()))?;
    let stale = cell.dir.join(ERROR_FILE);
    if stale.exists() {
        fs::remove_file(&stale)?;
    }
    let outcome = run(&cell.workload.requests, &cell.config, cluster)
        .map_err(anyhow::Error::from)
        .and_then(|result| write_cell(cell, cluster, &result));
    if let Err(e) = &outcome {
        fs::write(&stale, format!("{e:#}\n"))?;
    }
    outcome
}

fn write_cell(cell: &Cell, cluster: &ClusterSpec, result: &SimResult) -> Result<()> {
    write_apps(&cell.dir.join(APPS_FILE), result)?;
    write_rejected(&cell.dir.join(REJECTED_FILE), result)?;
    write_series(&cell.dir.join(SERIES_FILE), result)?;
    write_json(&cell.dir.join(SUMMARY_FILE), &summary_report(result)?)?;
    let meta = CellMeta {
        label: cell.config.label(),
        scheduler: scheduler_dir(&cell.config),
        policy: cell.config.policy.to_string(),
        preemption: cell.config.preemption,
        cluster: *cluster,
        workload: cell.workload.info.clone(),
        completed: result.records.len(),
        rejected: result.rejected.len(),
        makespan: result.makespan,
    };
    write_json(&cell.dir.join(META_FILE), &meta)
}

#[derive(Serialize)]
struct AppRow {
    id: u64,
    class: &'static str,
    submit_time_s: f64,
    start_time_s: f64,
    finish_time_s: f64,
    turnaround_s: f64,
    queuing_s: f64,
    slowdown: f64,
}

fn write_apps(path: &Path, result: &SimResult) -> Result<()> {
    let mut csv = csv_writer(path)?;
    csv.write_record(["id", "class", "submit_time_s", "start_time_s", "finish_time_s", "turnaround_s", "queuing_s", "slowdown"])?;
    for m in app_metrics(result)? {
        csv.serialize(AppRow {
            id: m.id,
            class: m.app_class.as_str(),
            submit_time_s: m.submit_time,
            start_time_s: m.start_time,
            finish_time_s: m.finish_time,
            turnaround_s: m.turnaround,
            queuing_s: m.queuing,
            slowdown: m.slowdown,
        })?;
    }
    csv.flush()?;
    Ok(())
}

fn write_rejected(path: &Path, result: &SimResult) -> Result<()> {
    let mut csv = csv_writer(path)?;
    csv.write_record(["id", "reason"])?;
    for r in &result.rejected {
        csv.write_record([r.id.to_string(), r.reason.clone()])?;
    }
    csv.flush()?;
    Ok(())
}

fn write_series(path: &Path, result: &SimResult) -> Result<()> {
    let mut csv = csv_writer(path)?;
    csv.write_record(["time_s", "cpu_allocated", "ram_allocated", "pending", "running"])?;
    for p in &result.series {
        csv.serialize((p.time, p.cpu_allocated, p.ram_allocated, p.pending, p.running))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Mean turnaround per cell label, for the console summary.
pub fn headline(outcomes: &[CellOutcome]) -> BTreeMap<PathBuf, Option<f64>> {
    outcomes
        .iter()
        .map(|o| {
            let mean = o.error.is_none().then(|| read_mean_turnaround(&o.dir)).flatten();
            (o.dir.clone(), mean)
        })
        .collect()
}

fn read_mean_turnaround(dir: &Path) -> Option<f64> {
    let text = fs::read_to_string(dir.join(SUMMARY_FILE)).ok()?;
    let rows: Vec<flexsched::metrics::ReportRow> = serde_json::from_str(&text).ok()?;
    rows.iter()
        .find(|r| r.metric == "turnaround" && r.class == flexsched::metrics::ALL_CLASSES && r.statistic == "mean")
        .map(|r| r.value)
}
