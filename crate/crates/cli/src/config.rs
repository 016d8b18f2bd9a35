//! Experiment configuration.
//!
//! The file is TOML. Every key is optional; omitted keys take the defaults
//! shown here.
//!
//! ```toml
//! out = "results"
//! schedulers = ["flexible"]        # flexible | rigid | malleable
//! policies = ["fifo"]              # fifo, sjf, srpt1, srpt2, hrrn, each with -1d/-2d/-3d
//! preemption = [false]             # one run per flag; `true` only applies to flexible
//! seeds = [1]
//!
//! [cluster]
//! n_machines = 10
//! cpu = 32.0
//! ram_mb = 131072.0
//!
//! [workload]
//! trace = "requests.csv"           # relative to the config file; or:
//! # [workload.spec]                # inline generator settings, see WorkloadSpec
//! # n_apps = 2000
//! ```
//!
//! Command-line flags override the corresponding keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flexsched::workload::WorkloadSpec;
use flexsched::{ClusterSpec, PolicyId, SchedulerConfig, SchedulerKind};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub n_machines: u32,
    pub cpu: f64,
    pub ram_mb: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { n_machines: 10, cpu: 32.0, ram_mb: 131072.0 }
    }
}

impl ClusterConfig {
    pub fn spec(&self) -> Result<ClusterSpec> {
        Ok(ClusterSpec::new(self.n_machines, self.cpu, self.ram_mb)?)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub trace: Option<PathBuf>,
    pub spec: Option<WorkloadSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cluster: ClusterConfig,
    pub workload: WorkloadConfig,
    pub schedulers: Vec<SchedulerKind>,
    pub policies: Vec<PolicyId>,
    pub preemption: Vec<bool>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cluster: ClusterConfig::default(),
            workload: WorkloadConfig::default(),
            schedulers: vec![SchedulerKind::Flexible],
            policies: vec![PolicyId::FIFO],
            preemption: vec![false],
            seeds: vec![1],
            out: PathBuf::from("results"),
        }
    }
}

/// Values given on the command line; each replaces the file's value when present.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub schedulers: Vec<SchedulerKind>,
    pub policies: Vec<PolicyId>,
    pub preemption: Option<bool>,
    pub trace: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(trace) = &config.workload.trace {
            if trace.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.workload.trace = Some(base.join(trace));
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(out) = o.out {
            self.out = out;
        }
        if !o.seeds.is_empty() {
            self.seeds = o.seeds;
        }
        if !o.schedulers.is_empty() {
            self.schedulers = o.schedulers;
        }
        if !o.policies.is_empty() {
            self.policies = o.policies;
        }
        if let Some(flag) = o.preemption {
            self.preemption = vec![flag];
        }
        if let Some(trace) = o.trace {
            self.workload = WorkloadConfig { trace: Some(trace), spec: None };
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cluster.spec()?;
        if self.schedulers.is_empty() || self.policies.is_empty() || self.seeds.is_empty() || self.preemption.is_empty() {
            bail!("at least one scheduler, policy, preemption flag and seed is required");
        }
        match (&self.workload.trace, &self.workload.spec) {
            (Some(_), Some(_)) => bail!("workload takes either `trace` or `spec`, not both"),
            (Some(trace), None) if !trace.is_file() => bail!("trace {} does not exist", trace.display()),
            (None, Some(spec)) => spec.validate()?,
            _ => {}
        }
        if self.scheduler_configs().is_empty() {
            bail!("no valid scheduler configuration: preemption is only supported by the flexible scheduler");
        }
        Ok(())
    }

    /// Generator settings for the inline workload; the default spec if none was given.
    pub fn workload_spec(&self) -> WorkloadSpec {
        self.workload.spec.clone().unwrap_or_default()
    }

    /// Every valid scheduler/policy/preemption combination, in configuration order.
    /// Preemptive variants of non-flexible schedulers are skipped.
    pub fn scheduler_configs(&self) -> Vec<SchedulerConfig> {
        let mut out = Vec::new();
        for kind in &self.schedulers {
            for preemption in &self.preemption {
                if *preemption && *kind != SchedulerKind::Flexible {
                    continue;
                }
                for policy in &self.policies {
                    let config = SchedulerConfig { kind: *kind, policy: *policy, preemption: *preemption };
                    if !out.contains(&config) {
                        out.push(config);
                    }
                }
            }
        }
        out
    }
}
