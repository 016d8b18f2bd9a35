//! The `genload` command: sample a workload and write it as a trace CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use flexsched::workload::write_trace;
use flexsched::{AppClass, RequestSpec};

pub fn write(path: &Path, requests: &[RequestSpec]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_trace(path, requests).with_context(|| format!("writing {}", path.display()))
}

#[derive(Default)]
struct Range {
    min: f64,
    max: f64,
    seen: bool,
}

impl Range {
    fn add(&mut self, v: f64) {
        if self.seen {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        } else {
            *self = Range { min: v, max: v, seen: true };
        }
    }
}

/// Count per class and the range of every demand column.
pub fn summary(requests: &[RequestSpec]) -> String {
    let mut counts: BTreeMap<AppClass, usize> = BTreeMap::new();
    let names = ["n_core", "n_elastic", "cpu_per_component", "ram_mb_per_component", "runtime_s"];
    let mut ranges: [Range; 5] = Default::default();
    for r in requests {
        *counts.entry(r.app_class).or_default() += 1;
        let values = [r.n_core as f64, r.n_elastic as f64, r.per_component.cpu, r.per_component.ram, r.nominal_runtime];
        for (range, v) in ranges.iter_mut().zip(values) {
            range.add(v);
        }
    }
    let mut out = format!("{} requests\n", requests.len());
    for (class, n) in &counts {
        let _ = writeln!(out, "  {:<14} {n}", class.as_str());
    }
    for (name, range) in names.iter().zip(&ranges) {
        if range.seen {
            let _ = writeln!(out, "  {name:<22} {} .. {}", range.min, range.max);
        }
    }
    if let Some(last) = requests.last() {
        let _ = writeln!(out, "  {:<22} {:.1}", "last_submit_s", last.submit_time);
    }
    out
}
