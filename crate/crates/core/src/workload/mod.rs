//! Synthetic workloads and the request trace format.
//!
//! Every sampled variable draws from its own PCG32 stream derived from the
//! master seed, so adding a variable or changing one table leaves the other
//! variables' draws untouched.

mod ecdf;
mod trace;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use crate::domain::{AppClass, ClusterSpec, RequestSpec, ResourceVector};
use crate::error::{Error, Result};

pub use ecdf::{sample_ecdf, EmpiricalDistribution};
pub use trace::{read_trace, read_trace_from, write_trace, write_trace_to, TRACE_HEADER};

/// Maximum number of redraws for a request whose core does not fit the cluster.
pub const MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mix {
    pub batch: f64,
    pub interactive: f64,
    /// Share of batch requests that are elastic.
    pub batch_elastic: f64,
    /// Share of batch requests that are rigid.
    pub batch_rigid: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Self { batch: 0.8, interactive: 0.2, batch_elastic: 0.8, batch_rigid: 0.2 }
    }
}

impl Mix {
    pub fn batch_only() -> Self {
        Self { batch: 1.0, interactive: 0.0, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let fractions = [self.batch, self.interactive, self.batch_elastic, self.batch_rigid];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("mix fractions must lie in [0, 1]".into()));
        }
        if (self.batch + self.interactive - 1.0).abs() > 1e-9 {
            return Err(Error::Config("batch + interactive must sum to 1".into()));
        }
        if self.batch > 0.0 && (self.batch_elastic + self.batch_rigid - 1.0).abs() > 1e-9 {
            return Err(Error::Config("batch_elastic + batch_rigid must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDistributions {
    pub runtime_s: EmpiricalDistribution,
    pub cpu: EmpiricalDistribution,
    pub ram_mb: EmpiricalDistribution,
    pub n_core: EmpiricalDistribution,
    pub n_elastic: EmpiricalDistribution,
}

impl ClassDistributions {
    fn validate(&self, class: &str) -> Result<()> {
        let bad = |reason: &str| Err(Error::Workload { class: class.into(), reason: reason.into() });
        if self.runtime_s.min() <= 0.0 {
            return bad("runtimes must be positive");
        }
        if self.cpu.min() < 0.0 || self.ram_mb.min() < 0.0 {
            return bad("resource demands must be non-negative");
        }
        if self.n_core.min() < 1.0 {
            return bad("every request needs at least one core component");
        }
        if self.n_elastic.min() < 0.0 {
            return bad("elastic counts must be non-negative");
        }
        Ok(())
    }

    /// Batch tables of the default desk workload.
    pub fn desk_batch() -> Self {
        Self {
            runtime_s: table(&[
                (30.0, 0.10),
                (60.0, 0.10),
                (120.0, 0.15),
                (300.0, 0.15),
                (600.0, 0.15),
                (1200.0, 0.10),
                (1800.0, 0.08),
                (3600.0, 0.08),
                (7200.0, 0.06),
                (14400.0, 0.03),
            ]),
            cpu: desk_cpu(),
            ram_mb: desk_ram(),
            n_core: table(&[(1.0, 0.30), (2.0, 0.30), (3.0, 0.20), (4.0, 0.15), (8.0, 0.05)]),
            n_elastic: table(&[
                (2.0, 0.15),
                (4.0, 0.15),
                (8.0, 0.15),
                (16.0, 0.15),
                (32.0, 0.12),
                (64.0, 0.10),
                (128.0, 0.08),
                (256.0, 0.05),
                (512.0, 0.03),
                (2048.0, 0.02),
            ]),
        }
    }

    /// Interactive tables of the default desk workload: small, long-lived.
    pub fn desk_interactive() -> Self {
        Self {
            runtime_s: table(&[(1800.0, 0.20), (3600.0, 0.30), (7200.0, 0.30), (14400.0, 0.15), (28800.0, 0.05)]),
            cpu: desk_cpu(),
            ram_mb: desk_ram(),
            n_core: table(&[(1.0, 0.5), (2.0, 0.3), (3.0, 0.2)]),
            n_elastic: table(&[
                (0.0, 0.30),
                (1.0, 0.20),
                (2.0, 0.20),
                (4.0, 0.10),
                (8.0, 0.10),
                (32.0, 0.05),
                (128.0, 0.03),
                (256.0, 0.02),
            ]),
        }
    }
}

fn table(masses: &[(f64, f64)]) -> EmpiricalDistribution {
    EmpiricalDistribution::from_masses(masses).expect("built-in table is valid")
}

fn desk_cpu() -> EmpiricalDistribution {
    table(&[(0.5, 0.30), (1.0, 0.35), (2.0, 0.20), (4.0, 0.10), (6.0, 0.05)])
}

fn desk_ram() -> EmpiricalDistribution {
    table(&[
        (128.0, 0.10),
        (512.0, 0.20),
        (1024.0, 0.20),
        (2048.0, 0.20),
        (4096.0, 0.15),
        (8192.0, 0.08),
        (16384.0, 0.05),
        (32768.0, 0.02),
    ])
}

fn desk_inter_arrival() -> EmpiricalDistribution {
    // bursts of closely spaced submissions plus long quiet gaps
    table(&[
        (1.0, 0.20),
        (3.0, 0.20),
        (6.0, 0.20),
        (180.0, 0.10),
        (360.0, 0.10),
        (720.0, 0.10),
        (1440.0, 0.10),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianArrivals {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub n_apps: usize,
    pub seed: u64,
    pub mix: Mix,
    pub inter_arrival_s: EmpiricalDistribution,
    /// Replaces `inter_arrival_s` when set. Negative draws are truncated to zero.
    pub gaussian_arrivals: Option<GaussianArrivals>,
    pub batch: ClassDistributions,
    pub interactive: ClassDistributions,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            n_apps: 2000,
            seed: 1,
            mix: Mix::default(),
            inter_arrival_s: desk_inter_arrival(),
            gaussian_arrivals: None,
            batch: ClassDistributions::desk_batch(),
            interactive: ClassDistributions::desk_interactive(),
        }
    }
}

impl WorkloadSpec {
    /// Default desk workload restricted to batch applications.
    pub fn desk_batch(n_apps: usize, seed: u64) -> Self {
        Self { n_apps, seed, mix: Mix::batch_only(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.mix.validate()?;
        self.batch.validate(AppClass::BatchElastic.as_str())?;
        self.interactive.validate(AppClass::Interactive.as_str())?;
        if self.inter_arrival_s.min() < 0.0 {
            return Err(Error::Config("inter-arrival times must be non-negative".into()));
        }
        if let Some(g) = self.gaussian_arrivals {
            if !(g.mu.is_finite() && g.sigma.is_finite() && g.sigma >= 0.0) {
                return Err(Error::Config("gaussian arrivals need a finite mu and sigma >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Variables with their own random stream.
#[derive(Clone, Copy)]
enum Stream {
    Arrival = 0,
    Class = 1,
    Runtime = 2,
    Cpu = 3,
    Ram = 4,
    NCore = 5,
    NElastic = 6,
}

fn stream(seed: u64, which: Stream) -> Pcg32 {
    let offset = (which as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    Pcg32::new(seed ^ offset, which as u64)
}

struct Streams {
    arrival: Pcg32,
    class: Pcg32,
    runtime: Pcg32,
    cpu: Pcg32,
    ram: Pcg32,
    n_core: Pcg32,
    n_elastic: Pcg32,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            arrival: stream(seed, Stream::Arrival),
            class: stream(seed, Stream::Class),
            runtime: stream(seed, Stream::Runtime),
            cpu: stream(seed, Stream::Cpu),
            ram: stream(seed, Stream::Ram),
            n_core: stream(seed, Stream::NCore),
            n_elastic: stream(seed, Stream::NElastic),
        }
    }
}

/// Generates `spec.n_apps` requests with ids `1..=n_apps` for `cluster`.
///
/// Requests whose core demand does not fit the cluster are redrawn up to
/// [`MAX_RETRIES`] times. Elastic counts are capped so that the full demand
/// fits the cluster, which keeps every request servable by the rigid baseline.
pub fn generate(spec: &WorkloadSpec, cluster: &ClusterSpec) -> Result<Vec<RequestSpec>> {
    spec.validate()?;
    cluster.validate()?;
    let total = cluster.total();
    let mut rng = Streams::new(spec.seed);
    let gaussian = match spec.gaussian_arrivals {
        Some(g) => Some(Normal::new(g.mu, g.sigma).map_err(|e| Error::Config(e.to_string()))?),
        None => None,
    };
    let elastic_share = spec.mix.batch_elastic / (spec.mix.batch_elastic + spec.mix.batch_rigid).max(f64::MIN_POSITIVE);

    let mut requests = Vec::with_capacity(spec.n_apps);
    let mut now = 0.0;
    for index in 0..spec.n_apps {
        if index > 0 {
            let gap = match &gaussian {
                Some(normal) => normal.sample(&mut rng.arrival).max(0.0),
                None => spec.inter_arrival_s.sample(rng.arrival.gen()),
            };
            now += gap;
        }

        let (u_class, u_kind): (f64, f64) = (rng.class.gen(), rng.class.gen());
        let app_class = if u_class < spec.mix.batch {
            if u_kind < elastic_share {
                AppClass::BatchElastic
            } else {
                AppClass::BatchRigid
            }
        } else {
            AppClass::Interactive
        };
        let dists = match app_class {
            AppClass::Interactive => &spec.interactive,
            _ => &spec.batch,
        };

        let mut drawn = None;
        for _ in 0..=MAX_RETRIES {
            let runtime = dists.runtime_s.sample(rng.runtime.gen());
            let per = ResourceVector::new(dists.cpu.sample(rng.cpu.gen()), dists.ram_mb.sample(rng.ram.gen()));
            let n_core = (dists.n_core.sample(rng.n_core.gen()).round() as u32).max(1);
            let n_elastic = dists.n_elastic.sample(rng.n_elastic.gen()).round() as u32;
            if (per * n_core).fits(&total) {
                drawn = Some((runtime, per, n_core, n_elastic));
                break;
            }
        }
        let Some((runtime, per, n_core, n_elastic)) = drawn else {
            return Err(Error::Workload {
                class: app_class.to_string(),
                reason: format!("core demand never fit the cluster {} after {MAX_RETRIES} retries", total),
            });
        };
        let n_elastic = match app_class {
            AppClass::BatchRigid => 0,
            _ => n_elastic.min(total.max_copies(&per, u32::MAX).saturating_sub(n_core)),
        };

        requests.push(RequestSpec {
            id: index as u64 + 1,
            submit_time: now,
            app_class,
            priority_class: app_class.default_priority(),
            n_core,
            n_elastic,
            per_component: per,
            nominal_runtime: runtime,
        });
    }
    Ok(requests)
}
