//! Event-driven schedulers.
//!
//! Every scheduler keeps the same [`SchedulerState`]: a serving set `S`, a
//! waiting line `L` and, for the preemptive flexible scheduler only, a
//! high-priority waiting line `W`. All three are kept in policy order. The
//! engine calls [`Scheduler::on_arrival`] and [`Scheduler::on_departure`] and
//! reads back the virtual assignment.

mod flexible;
mod malleable;
mod rigid;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{work_tolerance, Assignment, ClusterSpec, Grant, RequestSpec, ResourceVector, RunState};
use crate::error::{Error, Result};
use crate::policy::{sort_key, PolicyFamily, PolicyId, SortKey};

pub use flexible::FlexibleScheduler;
pub use malleable::MalleableScheduler;
pub use rigid::RigidScheduler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Flexible,
    Rigid,
    Malleable,
}

impl SchedulerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerKind::Flexible => "flexible",
            SchedulerKind::Rigid => "rigid",
            SchedulerKind::Malleable => "malleable",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flexible" => Ok(SchedulerKind::Flexible),
            "rigid" => Ok(SchedulerKind::Rigid),
            "malleable" => Ok(SchedulerKind::Malleable),
            _ => Err(Error::UnknownScheduler(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub kind: SchedulerKind,
    pub policy: PolicyId,
    pub preemption: bool,
}

impl SchedulerConfig {
    pub fn new(kind: SchedulerKind, policy: PolicyId, preemption: bool) -> Result<Self> {
        let config = Self { kind, policy, preemption };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.preemption && self.kind != SchedulerKind::Flexible {
            return Err(Error::Config(format!("preemption is only supported by the flexible scheduler, not {}", self.kind)));
        }
        Ok(())
    }

    /// Short label such as `flexible+preempt/srpt1-2d`.
    pub fn label(&self) -> String {
        let preempt = if self.preemption { "+preempt" } else { "" };
        format!("{}{}/{}", self.kind, preempt, self.policy)
    }
}

pub trait Scheduler: Send {
    fn state(&self) -> &SchedulerState;

    fn state_mut(&mut self) -> &mut SchedulerState;

    fn on_arrival(&mut self, req: RequestSpec, now: f64) -> Result<Assignment>;

    fn on_departure(&mut self, id: u64, now: f64) -> Result<Assignment>;
}

pub fn build(config: &SchedulerConfig, cluster: ClusterSpec) -> Result<Box<dyn Scheduler>> {
    config.validate()?;
    cluster.validate()?;
    let state = SchedulerState::new(cluster, config.policy, config.preemption);
    Ok(match config.kind {
        SchedulerKind::Flexible => Box::new(FlexibleScheduler::new(state)),
        SchedulerKind::Rigid => Box::new(RigidScheduler::new(state)),
        SchedulerKind::Malleable => Box::new(MalleableScheduler::new(state)),
    })
}

/// Which line a queued request is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Line {
    Waiting,
    Priority,
}

#[derive(Debug, Clone)]
pub struct SchedulerState {
    cluster: ClusterSpec,
    total: ResourceVector,
    policy: PolicyId,
    preemption: bool,
    known: BTreeSet<u64>,
    requests: BTreeMap<u64, RequestSpec>,
    runs: BTreeMap<u64, RunState>,
    serving: Vec<u64>,
    waiting: Vec<u64>,
    priority_waiting: Vec<u64>,
}

impl SchedulerState {
    pub fn new(cluster: ClusterSpec, policy: PolicyId, preemption: bool) -> Self {
        Self {
            cluster,
            total: cluster.total(),
            policy,
            preemption,
            known: BTreeSet::new(),
            requests: BTreeMap::new(),
            runs: BTreeMap::new(),
            serving: Vec::new(),
            waiting: Vec::new(),
            priority_waiting: Vec::new(),
        }
    }

    pub fn cluster(&self) -> &ClusterSpec {
        &self.cluster
    }

    pub fn total(&self) -> ResourceVector {
        self.total
    }

    pub fn policy(&self) -> PolicyId {
        self.policy
    }

    pub fn preemption(&self) -> bool {
        self.preemption
    }

    /// Serving set `S`, in policy order.
    pub fn serving(&self) -> &[u64] {
        &self.serving
    }

    /// Waiting line `L`, in policy order.
    pub fn waiting(&self) -> &[u64] {
        &self.waiting
    }

    /// High-priority waiting line `W`, in policy order.
    pub fn priority_waiting(&self) -> &[u64] {
        &self.priority_waiting
    }

    pub fn request(&self, id: u64) -> Option<&RequestSpec> {
        self.requests.get(&id)
    }

    pub fn run(&self, id: u64) -> Option<&RunState> {
        self.runs.get(&id)
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunState> {
        self.serving.iter().map(move |id| &self.runs[id])
    }

    pub fn pending_len(&self) -> usize {
        self.waiting.len() + self.priority_waiting.len()
    }

    /// Requests that are known and unfinished.
    pub fn unfinished(&self) -> usize {
        self.requests.len()
    }

    pub fn is_idle(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn assignment(&self) -> Assignment {
        let grants = self
            .serving
            .iter()
            .map(|id| {
                let req = &self.requests[id];
                let run = &self.runs[id];
                let grant = Grant { n_core: req.n_core, granted_elastic: run.granted_elastic, per_component: req.per_component };
                (*id, grant)
            })
            .collect();
        Assignment { grants }
    }

    pub fn allocated(&self) -> ResourceVector {
        self.serving
            .iter()
            .map(|id| self.requests[id].demand_with(self.runs[id].granted_elastic))
            .sum()
    }

    pub fn free(&self) -> ResourceVector {
        (self.total - self.allocated()).clamp_non_negative()
    }

    pub(crate) fn core_in_service(&self) -> ResourceVector {
        self.serving.iter().map(|id| self.requests[id].core_demand()).sum()
    }

    pub(crate) fn full_in_service(&self) -> ResourceVector {
        self.serving.iter().map(|id| self.requests[id].full_demand()).sum()
    }

    /// Resources held by elastic components of the serving set.
    pub(crate) fn granted_elastic_in_service(&self) -> ResourceVector {
        self.serving
            .iter()
            .map(|id| self.requests[id].per_component * self.runs[id].granted_elastic)
            .sum()
    }

    pub(crate) fn req(&self, id: u64) -> &RequestSpec {
        &self.requests[&id]
    }

    pub(crate) fn run_mut(&mut self, id: u64) -> &mut RunState {
        self.runs.get_mut(&id).expect("serving request has a run state")
    }

    pub fn key(&self, id: u64, now: f64) -> Result<SortKey> {
        let req = self.requests.get(&id).ok_or(Error::Invariant(format!("unknown request {id}")))?;
        sort_key(self.policy, req, self.runs.get(&id), now)
    }

    /// Validates and records a new request. `admission_demand` is the demand
    /// that must eventually fit the empty cluster for the request to be servable.
    pub(crate) fn register(&mut self, req: RequestSpec, admission_demand: ResourceVector, now: f64) -> Result<u64> {
        req.validate()?;
        if self.known.contains(&req.id) {
            return Err(Error::DuplicateRequest(req.id));
        }
        if now < req.submit_time - crate::domain::EPS {
            return Err(Error::ClockInversion { id: req.id, now, submit: req.submit_time });
        }
        self.known.insert(req.id);
        if !admission_demand.fits(&self.total) {
            return Err(Error::Rejected {
                id: req.id,
                reason: format!("demand {} exceeds cluster capacity {}", admission_demand, self.total),
            });
        }
        let id = req.id;
        self.requests.insert(id, req);
        Ok(id)
    }

    fn line_mut(&mut self, line: Line) -> &mut Vec<u64> {
        match line {
            Line::Waiting => &mut self.waiting,
            Line::Priority => &mut self.priority_waiting,
        }
    }

    /// Inserts a queued request at its policy position.
    pub(crate) fn enqueue(&mut self, id: u64, line: Line, now: f64) -> Result<()> {
        let key = self.key(id, now)?;
        let ids = match line {
            Line::Waiting => &self.waiting,
            Line::Priority => &self.priority_waiting,
        };
        let mut err = None;
        let pos = ids.partition_point(|other| match self.key(*other, now) {
            Ok(k) => k < key,
            Err(e) => {
                err.get_or_insert(e);
                false
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        self.line_mut(line).insert(pos, id);
        Ok(())
    }

    /// Moves a queued request into `S`, creating its run state. Grants are
    /// left at zero; the caller re-sorts `S` and assigns elastic components.
    pub(crate) fn admit(&mut self, id: u64, now: f64) -> Result<()> {
        for line in [Line::Waiting, Line::Priority] {
            let ids = self.line_mut(line);
            if let Some(pos) = ids.iter().position(|x| *x == id) {
                ids.remove(pos);
                break;
            }
        }
        let req = &self.requests[&id];
        if self.runs.contains_key(&id) {
            return Err(Error::Invariant(format!("request {id} admitted twice")));
        }
        self.runs.insert(id, RunState::start(req, now));
        self.serving.push(id);
        Ok(())
    }

    /// Re-sorts the lines whose keys can change over time. Queued keys only
    /// move under HRRN; serving keys only move under SRPT. Everything else
    /// stays ordered through `enqueue`.
    pub(crate) fn resort(&mut self, now: f64) -> Result<()> {
        let family = self.policy.family;
        if family == PolicyFamily::Hrrn {
            self.waiting = self.sorted(&self.waiting, now)?;
            self.priority_waiting = self.sorted(&self.priority_waiting, now)?;
        }
        self.sort_serving(now)
    }

    pub(crate) fn sort_serving(&mut self, now: f64) -> Result<()> {
        self.serving = self.sorted(&self.serving, now)?;
        Ok(())
    }

    fn sorted(&self, ids: &[u64], now: f64) -> Result<Vec<u64>> {
        let mut keyed = ids.iter().map(|id| self.key(*id, now)).collect::<Result<Vec<_>>>()?;
        keyed.sort();
        Ok(keyed.into_iter().map(|k| k.id).collect())
    }

    /// Integrates progress of every serving request up to `now`.
    pub fn advance(&mut self, now: f64) -> Result<()> {
        for id in &self.serving {
            let run = self.runs.get_mut(id).expect("serving request has a run state");
            advance_progress(run, now)?;
        }
        Ok(())
    }

    /// Removes a completed request from `S`.
    pub(crate) fn finish(&mut self, id: u64, now: f64) -> Result<RunState> {
        let pos = self.serving.iter().position(|x| *x == id).ok_or(Error::NotServing(id))?;
        let run = &self.runs[&id];
        if !run.is_complete() {
            return Err(Error::Invariant(format!(
                "request {id} departing with progress {} of {}",
                run.progress, run.total_work
            )));
        }
        self.serving.remove(pos);
        self.requests.remove(&id);
        let mut run = self.runs.remove(&id).expect("serving request has a run state");
        run.progress = run.total_work;
        run.finish_time = Some(now);
        Ok(run)
    }

    /// Checks the structural invariants; used by tests and debug builds.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        let mut seen = BTreeSet::new();
        for id in self.serving.iter().chain(&self.waiting).chain(&self.priority_waiting) {
            if !seen.insert(*id) {
                return fail(format!("request {id} appears in more than one line"));
            }
        }
        if seen.len() != self.requests.len() {
            return fail(format!("{} unfinished requests but {} queued or serving", self.requests.len(), seen.len()));
        }
        if !self.preemption && !self.priority_waiting.is_empty() {
            return fail("priority line used without preemption".into());
        }
        if !self.core_in_service().fits(&self.total) {
            return fail("core demand of the serving set exceeds the cluster".into());
        }
        if !self.allocated().fits(&self.total) {
            return fail(format!("allocation {} exceeds capacity {}", self.allocated(), self.total));
        }
        for id in &self.serving {
            let run = &self.runs[id];
            if run.granted_elastic > run.n_elastic {
                return fail(format!("request {id} holds more elastic components than it asked for"));
            }
            if run.progress > run.total_work + work_tolerance(run.total_work) {
                return fail(format!("request {id} overran its work"));
            }
        }
        Ok(())
    }
}

/// Adds `(n_core + granted_elastic) * (to - from)` component-seconds.
pub fn advance_progress(run: &mut RunState, to: f64) -> Result<()> {
    let dt = to - run.last_update;
    if dt < -crate::domain::EPS {
        return Err(Error::Invariant(format!(
            "time moved backwards for request {}: {} -> {}",
            run.request_id, run.last_update, to
        )));
    }
    if dt > 0.0 {
        run.progress += run.rate() * dt;
    }
    run.last_update = to.max(run.last_update);
    let overrun = run.progress - run.total_work;
    if overrun > work_tolerance(run.total_work) {
        return Err(Error::Invariant(format!(
            "request {} progress {} exceeds total work {}",
            run.request_id, run.progress, run.total_work
        )));
    }
    if overrun > 0.0 {
        run.progress = run.total_work;
    }
    Ok(())
}

/// Time at which `run` completes if its grant does not change.
pub fn next_departure(run: &RunState, now: f64) -> f64 {
    now + run.remaining_work() / run.rate()
}
