#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use flexsched::engine::{Event, Observer};
use flexsched::policy::PolicyId;
use flexsched::schedulers::{self, SchedulerState};
use flexsched::workload::read_trace;
use flexsched::{AppClass, ClusterSpec, Error, RequestSpec, ResourceVector, RunState, SchedulerConfig, SchedulerKind};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn four_requests() -> Vec<RequestSpec> {
    read_trace(data_path("four_requests.csv")).expect("fixture parses")
}

pub fn four_requests_cluster() -> ClusterSpec {
    ClusterSpec::new(1, 10.0, 10.0).unwrap()
}

pub fn config(kind: &str, policy: &str, preemption: bool) -> SchedulerConfig {
    SchedulerConfig::new(kind.parse().unwrap(), policy.parse().unwrap(), preemption).unwrap()
}

/// Every scheduler/policy/preemption combination.
pub fn all_configs() -> Vec<SchedulerConfig> {
    let mut out = Vec::new();
    for policy in PolicyId::all() {
        for (kind, preemption) in [
            (SchedulerKind::Rigid, false),
            (SchedulerKind::Malleable, false),
            (SchedulerKind::Flexible, false),
            (SchedulerKind::Flexible, true),
        ] {
            out.push(SchedulerConfig::new(kind, policy, preemption).unwrap());
        }
    }
    out
}

/// A small random instance with integer demands and times.
pub fn small_workload(seed: u64) -> (ClusterSpec, Vec<RequestSpec>) {
    let mut rng = Pcg64::seed_from_u64(seed);
    let cluster = ClusterSpec::new(rng.gen_range(1..=3), rng.gen_range(4..=8) as f64, rng.gen_range(4..=8) as f64).unwrap();
    let n = rng.gen_range(1..=50);
    let requests = (1..=n)
        .map(|id| {
            let app_class = match rng.gen_range(0..10) {
                0..=5 => AppClass::BatchElastic,
                6..=7 => AppClass::BatchRigid,
                _ => AppClass::Interactive,
            };
            let n_elastic = if app_class == AppClass::BatchRigid { 0 } else { rng.gen_range(0..=4) };
            RequestSpec {
                id,
                submit_time: rng.gen_range(0..=20) as f64,
                app_class,
                priority_class: app_class.default_priority(),
                n_core: rng.gen_range(1..=3),
                n_elastic,
                per_component: ResourceVector::new(rng.gen_range(1..=2) as f64, rng.gen_range(1..=2) as f64),
                nominal_runtime: rng.gen_range(1..=5) as f64,
            }
        })
        .collect();
    (cluster, requests)
}

/// Records every invariant violation seen during a run.
#[derive(Default)]
pub struct InvariantObserver {
    pub violations: Vec<String>,
    pub events: usize,
}

impl Observer for InvariantObserver {
    fn on_departure(&mut self, run: &RunState, now: f64) {
        let tol = 1e-9 * run.total_work.max(1.0);
        if (run.progress - run.total_work).abs() > tol {
            self.violations
                .push(format!("t={now}: request {} departs with {} of {}", run.request_id, run.progress, run.total_work));
        }
    }

    fn after_event(&mut self, event: &Event, state: &SchedulerState) {
        self.events += 1;
        let total = state.total();
        let allocated = state.allocated();
        if allocated.cpu > total.cpu || allocated.ram > total.ram {
            self.violations.push(format!("t={}: allocation {allocated} exceeds {total}", event.time));
        }
        for run in state.runs() {
            let req = state.request(run.request_id).expect("serving request is known");
            if run.n_core != req.n_core || run.granted_elastic > req.n_elastic {
                self.violations.push(format!(
                    "t={}: request {} holds {} core / {} elastic of {} / {}",
                    event.time, req.id, run.n_core, run.granted_elastic, req.n_core, req.n_elastic
                ));
            }
        }
        if let Err(e) = state.check_invariants() {
            self.violations.push(format!("t={}: {e}", event.time));
        }
    }
}

/// Re-simulates `requests` by fixed-step time integration instead of an
/// event queue. Progress of every serving request is accumulated in steps of
/// `dt`; a completion or arrival inside a step cuts the step at that instant.
/// Scheduling decisions are delegated to the scheduler under test.
/// Simultaneous completions are handled in the order their current grants
/// were issued. Returns finish times of accepted requests.
pub fn step_finish_times(
    requests: &[RequestSpec],
    config: &SchedulerConfig,
    cluster: &ClusterSpec,
    dt: f64,
) -> Result<BTreeMap<u64, f64>, Error> {
    let mut sched = schedulers::build(config, *cluster)?;
    let mut arrivals: Vec<&RequestSpec> = requests.iter().collect();
    arrivals.sort_by(|a, b| a.submit_time.total_cmp(&b.submit_time));
    let mut next_arrival = 0;

    let mut stepper = Stepper::default();
    let mut finish = BTreeMap::new();
    let mut t = 0.0_f64;
    let mut tick: u64 = 0;

    loop {
        if stepper.serving.is_empty() {
            let Some(req) = arrivals.get(next_arrival) else { break };
            t = t.max(req.submit_time);
            tick = (t / dt).floor() as u64;
        } else {
            let grid = (tick + 1) as f64 * dt;
            let mut end = grid;
            if let Some(req) = arrivals.get(next_arrival) {
                end = end.min(req.submit_time);
            }
            for s in &stepper.serving {
                end = end.min(t + (s.work - s.progress) / s.rate);
            }
            for s in stepper.serving.iter_mut() {
                s.progress += s.rate * (end - t);
            }
            t = end;
            if end >= grid {
                tick += 1;
            }
        }

        while let Some(id) = stepper.next_completion() {
            sched.state_mut().advance(t)?;
            sched.on_departure(id, t)?;
            finish.insert(id, t);
            stepper.sync(sched.state());
        }
        while let Some(req) = arrivals.get(next_arrival).filter(|r| r.submit_time <= t) {
            next_arrival += 1;
            sched.state_mut().advance(t)?;
            match sched.on_arrival((*req).clone(), t) {
                Ok(_) | Err(Error::Rejected { .. }) => {}
                Err(e) => return Err(e),
            }
            stepper.sync(sched.state());
        }
        if stepper.serving.is_empty() && next_arrival == arrivals.len() {
            break;
        }
    }
    if !sched.state().is_idle() {
        return Err(Error::NoProgress { id: sched.state().waiting().first().copied().unwrap_or_default() });
    }
    Ok(finish)
}

struct Stepped {
    id: u64,
    rate: f64,
    progress: f64,
    work: f64,
    revision: u64,
    issued: u64,
}

#[derive(Default)]
struct Stepper {
    serving: Vec<Stepped>,
    issued: u64,
}

impl Stepper {
    /// Picks up admissions, departures and grant changes from the scheduler.
    fn sync(&mut self, state: &SchedulerState) {
        let mut old: BTreeMap<u64, Stepped> = self.serving.drain(..).map(|s| (s.id, s)).collect();
        for run in state.runs() {
            let entry = match old.remove(&run.request_id) {
                Some(mut s) if s.revision == run.revision => {
                    s.rate = run.rate();
                    s
                }
                previous => {
                    self.issued += 1;
                    Stepped {
                        id: run.request_id,
                        rate: run.rate(),
                        progress: previous.map_or(0.0, |s| s.progress),
                        work: run.total_work,
                        revision: run.revision,
                        issued: self.issued,
                    }
                }
            };
            self.serving.push(entry);
        }
    }

    fn next_completion(&self) -> Option<u64> {
        self.serving
            .iter()
            .filter(|s| s.progress >= s.work - 1e-9 * s.work.max(1.0))
            .min_by_key(|s| s.issued)
            .map(|s| s.id)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
