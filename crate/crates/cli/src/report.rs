//! The `report` command: gathers result cells and emits long-format tables.
//!
//! `report.csv` has one row per (cell, metric, class, statistic).
//! `comparison.csv` groups cells that share a seed (or the same trace) and
//! lists every statistic per cell (`measure = value`) plus its ratio to the
//! group's baseline cell (`measure = ratio`, candidate over baseline). Cells
//! whose workload checksum differs from the baseline's are flagged.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flexsched::metrics::ReportRow;
use flexsched::{PolicyId, SchedulerKind};
use walkdir::WalkDir;

use crate::simulate::{csv_writer, CellMeta, META_FILE, SUMMARY_FILE};

pub const REPORT_FILE: &str = "report.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug)]
pub struct CellResult {
    pub meta: CellMeta,
    pub rows: Vec<ReportRow>,
}

impl CellResult {
    fn group(&self) -> String {
        match self.meta.workload.seed {
            Some(seed) => seed.to_string(),
            None => "trace".to_owned(),
        }
    }

    /// Rigid, malleable, flexible, flexible+preempt; then policy order.
    fn rank(&self) -> (usize, usize, String) {
        let kind = match self.meta.scheduler.split('+').next().and_then(|s| s.parse().ok()) {
            Some(SchedulerKind::Rigid) => 0,
            Some(SchedulerKind::Malleable) => 1,
            Some(SchedulerKind::Flexible) => 2,
            None => 3,
        };
        let policy = self
            .meta
            .policy
            .parse::<PolicyId>()
            .ok()
            .and_then(|p| PolicyId::all().iter().position(|q| *q == p))
            .unwrap_or(usize::MAX);
        (kind * 2 + usize::from(self.meta.preemption), policy, self.meta.label.clone())
    }
}

/// Finds every completed cell below `roots`.
pub fn collect(roots: &[PathBuf]) -> Result<Vec<CellResult>> {
    let mut cells = Vec::new();
    for root in roots {
        if !root.exists() {
            bail!("{} does not exist", root.display());
        }
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry?;
            if entry.file_name() != META_FILE {
                continue;
            }
            let dir = entry.path().parent().unwrap_or(Path::new(".")).to_path_buf();
            let summary = dir.join(SUMMARY_FILE);
            if !summary.is_file() {
                continue;
            }
            let meta: CellMeta = read_json(entry.path())?;
            let rows: Vec<ReportRow> = read_json(&summary)?;
            cells.push(CellResult { meta, rows });
        }
    }
    if cells.is_empty() {
        bail!("no result cells found under {}", roots.iter().map(|r| r.display().to_string()).collect::<Vec<_>>().join(", "));
    }
    Ok(cells)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_report(cells: &[CellResult], out: &Path) -> Result<()> {
    let mut csv = csv_writer(&out.join(REPORT_FILE))?;
    csv.write_record(["cell", "scheduler", "policy", "preemption", "seed", "metric", "class", "statistic", "value"])?;
    for cell in cells {
        let seed = cell.meta.workload.seed.map(|s| s.to_string()).unwrap_or_default();
        for row in &cell.rows {
            csv.write_record([
                cell.meta.label.as_str(),
                cell.meta.scheduler.as_str(),
                cell.meta.policy.as_str(),
                if cell.meta.preemption { "true" } else { "false" },
                seed.as_str(),
                row.metric.as_str(),
                row.class.as_str(),
                row.statistic.as_str(),
                &row.value.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// One line of `comparison.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metric: String,
    pub statistic: String,
    pub measure: &'static str,
    pub class: String,
    pub group: String,
    pub cell: String,
    pub baseline: String,
    pub value: Option<f64>,
    pub workload_mismatch: bool,
}

/// Builds the comparison rows. `baseline` selects the reference cell of each
/// group by label; by default it is the first cell in scheduler/policy order.
pub fn compare(cells: &[CellResult], baseline: Option<&str>) -> Result<Vec<Comparison>> {
    let mut groups: BTreeMap<String, Vec<&CellResult>> = BTreeMap::new();
    for cell in cells {
        groups.entry(cell.group()).or_default().push(cell);
    }
    let mut out = Vec::new();
    for (group, mut members) in groups {
        members.sort_by_key(|c| c.rank());
        let base = match baseline {
            Some(label) => *members
                .iter()
                .find(|c| c.meta.label == label)
                .with_context(|| format!("baseline {label} has no cell for workload {group}"))?,
            None => members[0],
        };
        for cell in &members {
            let mismatch = cell.meta.workload.checksum != base.meta.workload.checksum;
            if mismatch {
                log::warn!("{} and {} ran different workloads", cell.meta.label, base.meta.label);
            }
            let base_rows: BTreeMap<(&str, &str, &str), f64> = base
                .rows
                .iter()
                .map(|r| ((r.metric.as_str(), r.class.as_str(), r.statistic.as_str()), r.value))
                .collect();
            for row in &cell.rows {
                let line = |measure, value| Comparison {
                    metric: row.metric.clone(),
                    statistic: row.statistic.clone(),
                    measure,
                    class: row.class.clone(),
                    group: group.clone(),
                    cell: cell.meta.label.clone(),
                    baseline: base.meta.label.clone(),
                    value,
                    workload_mismatch: mismatch,
                };
                out.push(line("value", Some(row.value)));
                if std::ptr::eq(*cell, base) {
                    continue;
                }
                if let Some(reference) = base_rows.get(&(row.metric.as_str(), row.class.as_str(), row.statistic.as_str())) {
                    let ratio = (*reference != 0.0).then(|| row.value / reference);
                    out.push(line("ratio", ratio));
                }
            }
        }
    }
    Ok(out)
}

pub fn write_comparison(rows: &[Comparison], out: &Path) -> Result<()> {
    let mut csv = csv_writer(&out.join(COMPARISON_FILE))?;
    csv.write_record(["metric", "statistic", "measure", "class", "workload", "cell", "baseline", "value", "workload_mismatch"])?;
    for r in rows {
        csv.write_record([
            r.metric.as_str(),
            r.statistic.as_str(),
            r.measure,
            r.class.as_str(),
            r.group.as_str(),
            r.cell.as_str(),
            r.baseline.as_str(),
            &r.value.map(|v| v.to_string()).unwrap_or_default(),
            if r.workload_mismatch { "true" } else { "false" },
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Console table: turnaround mean and p50 per cell, with ratios to the baseline.
pub fn print_headline(rows: &[Comparison]) {
    let pick = |r: &&Comparison| r.metric == "turnaround" && r.class == flexsched::metrics::ALL_CLASSES;
    let mut table: BTreeMap<(&str, &str), BTreeMap<(&str, &str), Option<f64>>> = BTreeMap::new();
    for r in rows.iter().filter(pick) {
        if r.statistic == "mean" || r.statistic == "p50" {
            table.entry((r.group.as_str(), r.cell.as_str())).or_default().insert((r.statistic.as_str(), r.measure), r.value);
        }
    }
    println!("{:<10} {:<32} {:>14} {:>14} {:>10}", "workload", "cell", "mean turnaround", "p50 turnaround", "p50 ratio");
    for ((group, cell), stats) in table {
        let fmt = |v: Option<&Option<f64>>| v.copied().flatten().map_or("-".to_owned(), |x| format!("{x:.2}"));
        println!(
            "{:<10} {:<32} {:>14} {:>14} {:>10}",
            group,
            cell,
            fmt(stats.get(&("mean", "value"))),
            fmt(stats.get(&("p50", "value"))),
            fmt(stats.get(&("p50", "ratio")))
        );
    }
}
