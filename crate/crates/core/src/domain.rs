//! Value types shared by the schedulers, the engine and the workload tools.
//!
//! The cluster is a single aggregate pool of two-dimensional resources. A
//! request is a set of identical components, some of them core (needed to run
//! at all) and the rest elastic (optional accelerators). Work is measured in
//! component-seconds: a request with all of its components allocated finishes
//! in exactly its nominal runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every resource and time comparison.
pub const EPS: f64 = 1e-9;

/// Tolerance for comparing accumulated work against a request's total work.
/// Grows with the magnitude of the work so that long, wide requests are not
/// flagged for ordinary rounding.
pub fn work_tolerance(total_work: f64) -> f64 {
    EPS * total_work.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceVector {
    /// Fractional cores.
    pub cpu: f64,
    /// Megabytes.
    pub ram: f64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector { cpu: 0.0, ram: 0.0 };

    pub const fn new(cpu: f64, ram: f64) -> Self {
        Self { cpu, ram }
    }

    pub fn is_valid(&self) -> bool {
        self.cpu.is_finite() && self.ram.is_finite() && self.cpu >= 0.0 && self.ram >= 0.0
    }

    /// True iff `self` fits inside `capacity` in every dimension.
    pub fn fits(&self, capacity: &ResourceVector) -> bool {
        fits(self, capacity)
    }

    /// True iff `self` is strictly below `total` in every dimension.
    pub fn strictly_below(&self, total: &ResourceVector) -> bool {
        self.cpu < total.cpu - EPS && self.ram < total.ram - EPS
    }

    /// Largest `g <= limit` such that `g * unit` fits in `self`.
    pub fn max_copies(&self, unit: &ResourceVector, limit: u32) -> u32 {
        fn along(avail: f64, need: f64) -> f64 {
            if need <= 0.0 {
                f64::INFINITY
            } else {
                ((avail + EPS) / need).floor().max(0.0)
            }
        }
        let copies = along(self.cpu, unit.cpu).min(along(self.ram, unit.ram));
        if copies >= limit as f64 {
            limit
        } else {
            copies as u32
        }
    }

    /// Clamps tiny negative rounding residue to zero.
    pub fn clamp_non_negative(self) -> Self {
        Self::new(self.cpu.max(0.0), self.ram.max(0.0))
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::new(self.cpu * factor, self.ram * factor)
    }
}

/// Component-wise containment: `demand <= capacity` in both dimensions.
pub fn fits(demand: &ResourceVector, capacity: &ResourceVector) -> bool {
    demand.cpu <= capacity.cpu + EPS && demand.ram <= capacity.ram + EPS
}

impl Add for ResourceVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.cpu + rhs.cpu, self.ram + rhs.ram)
    }
}

impl AddAssign for ResourceVector {
    fn add_assign(&mut self, rhs: Self) {
        self.cpu += rhs.cpu;
        self.ram += rhs.ram;
    }
}

impl Sub for ResourceVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.cpu - rhs.cpu, self.ram - rhs.ram)
    }
}

impl SubAssign for ResourceVector {
    fn sub_assign(&mut self, rhs: Self) {
        self.cpu -= rhs.cpu;
        self.ram -= rhs.ram;
    }
}

impl Mul<u32> for ResourceVector {
    type Output = Self;
    fn mul(self, rhs: u32) -> Self {
        self.scale(rhs as f64)
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} cpu, {} MB)", self.cpu, self.ram)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppClass {
    BatchElastic,
    BatchRigid,
    Interactive,
}

impl AppClass {
    pub const ALL: [AppClass; 3] = [AppClass::BatchElastic, AppClass::BatchRigid, AppClass::Interactive];

    pub fn as_str(&self) -> &'static str {
        match self {
            AppClass::BatchElastic => "batch_elastic",
            AppClass::BatchRigid => "batch_rigid",
            AppClass::Interactive => "interactive",
        }
    }

    /// Short label used in reports (B-E, B-R, Int).
    pub fn label(&self) -> &'static str {
        match self {
            AppClass::BatchElastic => "B-E",
            AppClass::BatchRigid => "B-R",
            AppClass::Interactive => "Int",
        }
    }

    pub fn default_priority(&self) -> u32 {
        match self {
            AppClass::Interactive => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for AppClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AppClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "batch_elastic" => Ok(AppClass::BatchElastic),
            "batch_rigid" => Ok(AppClass::BatchRigid),
            "interactive" => Ok(AppClass::Interactive),
            other => Err(format!("unknown application class {other:?}")),
        }
    }
}

/// An application submitted to the cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSpec {
    pub id: u64,
    pub submit_time: f64,
    pub app_class: AppClass,
    pub priority_class: u32,
    pub n_core: u32,
    pub n_elastic: u32,
    /// Demand of a single component; core and elastic components are identical.
    pub per_component: ResourceVector,
    /// Runtime with every component allocated.
    pub nominal_runtime: f64,
}

impl RequestSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Err(Error::InvalidRequest { id: self.id, reason: reason.to_owned() });
        if !(self.submit_time.is_finite() && self.submit_time >= 0.0) {
            return invalid("submit time must be finite and non-negative");
        }
        if self.n_core == 0 {
            return invalid("at least one core component is required");
        }
        if self.app_class == AppClass::BatchRigid && self.n_elastic != 0 {
            return invalid("batch_rigid requests cannot have elastic components");
        }
        if !self.per_component.is_valid() {
            return invalid("per-component demand must be finite and non-negative");
        }
        if !(self.nominal_runtime.is_finite() && self.nominal_runtime > 0.0) {
            return invalid("nominal runtime must be finite and positive");
        }
        Ok(())
    }

    pub fn n_components(&self) -> u32 {
        self.n_core + self.n_elastic
    }

    pub fn core_demand(&self) -> ResourceVector {
        core_demand(self)
    }

    pub fn full_demand(&self) -> ResourceVector {
        full_demand(self)
    }

    /// Demand of the core plus `granted` elastic components.
    pub fn demand_with(&self, granted: u32) -> ResourceVector {
        self.per_component * (self.n_core + granted)
    }

    /// Component-seconds needed to complete the request.
    pub fn total_work(&self) -> f64 {
        self.nominal_runtime * self.n_components() as f64
    }
}

pub fn core_demand(req: &RequestSpec) -> ResourceVector {
    req.per_component * req.n_core
}

pub fn full_demand(req: &RequestSpec) -> ResourceVector {
    req.per_component * req.n_components()
}

/// Execution record of a request that has been admitted to the serving set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub request_id: u64,
    pub n_core: u32,
    pub n_elastic: u32,
    pub total_work: f64,
    pub progress: f64,
    pub granted_elastic: u32,
    pub last_update: f64,
    pub start_time: f64,
    pub finish_time: Option<f64>,
    /// Bumped every time the grant changes; departure events carry it.
    pub revision: u64,
}

impl RunState {
    pub fn start(req: &RequestSpec, now: f64) -> Self {
        Self {
            request_id: req.id,
            n_core: req.n_core,
            n_elastic: req.n_elastic,
            total_work: req.total_work(),
            progress: 0.0,
            granted_elastic: 0,
            last_update: now,
            start_time: now,
            finish_time: None,
            revision: 0,
        }
    }

    /// Components currently allocated; the progress rate in component-seconds per second.
    pub fn rate(&self) -> f64 {
        (self.n_core + self.granted_elastic) as f64
    }

    pub fn remaining_work(&self) -> f64 {
        (self.total_work - self.progress).max(0.0)
    }

    pub fn is_complete(&self) -> bool {
        self.total_work - self.progress <= work_tolerance(self.total_work)
    }

    /// Sets the grant, bumping the revision if it changed. Returns whether it changed.
    pub fn set_grant(&mut self, granted: u32) -> bool {
        debug_assert!(granted <= self.n_elastic);
        if granted == self.granted_elastic {
            return false;
        }
        self.granted_elastic = granted;
        self.revision += 1;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub n_machines: u32,
    pub per_machine: ResourceVector,
}

impl ClusterSpec {
    pub fn new(n_machines: u32, cpu: f64, ram_mb: f64) -> Result<Self> {
        let spec = Self { n_machines, per_machine: ResourceVector::new(cpu, ram_mb) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.total();
        if self.n_machines == 0 || !total.is_valid() || total.cpu <= 0.0 || total.ram <= 0.0 {
            return Err(Error::InvalidCluster(format!(
                "{} machines of {} must give a positive total",
                self.n_machines, self.per_machine
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> ResourceVector {
        self.per_machine * self.n_machines
    }
}

/// Per-request allocation inside the virtual assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub n_core: u32,
    pub granted_elastic: u32,
    pub per_component: ResourceVector,
}

impl Grant {
    pub fn allocated(&self) -> ResourceVector {
        self.per_component * (self.n_core + self.granted_elastic)
    }
}

/// The scheduler's virtual assignment: which requests are served and how many
/// elastic components each one holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub grants: BTreeMap<u64, Grant>,
}

impl Assignment {
    pub fn granted_elastic(&self, id: u64) -> Option<u32> {
        self.grants.get(&id).map(|g| g.granted_elastic)
    }

    pub fn allocated(&self) -> ResourceVector {
        self.grants.values().map(Grant::allocated).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn len(&self) -> usize {
        self.grants.len()
    }
}
