//! Deterministic discrete-event simulation loop.
//!
//! Events are processed in `(time, kind, sequence)` order, departures before
//! arrivals at equal times. Before each handler runs, the progress of every
//! serving request is integrated up to the event time. After the handler,
//! any request whose grant changed gets a fresh departure event stamped with
//! the new grant revision; older departure events for it become stale and
//! are dropped when popped.
//!
//! A departure time that lies within the request's work tolerance of an
//! already pending event time is snapped onto it, so events that coincide in
//! exact arithmetic also coincide in floating point and follow the tie rules.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::domain::{work_tolerance, AppClass, ClusterSpec, RequestSpec, RunState};
use crate::error::{Error, Result};
use crate::schedulers::{self, next_departure, SchedulerConfig, SchedulerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Departure,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub request_id: u64,
    /// Arrivals use their index in the input slice; departures are numbered after them.
    pub sequence: u64,
    /// Grant revision a departure was computed under.
    pub revision: u64,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRecord {
    pub id: u64,
    pub app_class: AppClass,
    pub priority_class: u32,
    pub submit_time: f64,
    pub start_time: Option<f64>,
    pub finish_time: Option<f64>,
    pub n_core: u32,
    pub n_elastic: u32,
    pub nominal_runtime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: u64,
    pub reason: String,
}

/// Cluster state from `time` until the next point. Allocation is a fraction of the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: f64,
    pub cpu_allocated: f64,
    pub ram_allocated: f64,
    pub pending: usize,
    pub running: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: Option<u64>,
    pub scheduler: SchedulerConfig,
    pub cluster: ClusterSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub meta: RunMeta,
    /// One record per accepted request, sorted by id.
    pub records: Vec<AppRecord>,
    pub rejected: Vec<Rejection>,
    pub series: Vec<SeriesPoint>,
    pub makespan: f64,
}

/// Hooks into the event loop, mostly for verification.
pub trait Observer {
    /// Called with the run state of a departing request, before it is finalized.
    fn on_departure(&mut self, _run: &RunState, _now: f64) {}

    /// Called after every applied event with the resulting scheduler state.
    fn after_event(&mut self, _event: &Event, _state: &SchedulerState) {}
}

impl Observer for () {}

pub fn run(requests: &[RequestSpec], config: &SchedulerConfig, cluster: &ClusterSpec) -> Result<SimResult> {
    run_observed(requests, config, cluster, &mut ())
}

pub fn run_observed(
    requests: &[RequestSpec],
    config: &SchedulerConfig,
    cluster: &ClusterSpec,
    observer: &mut dyn Observer,
) -> Result<SimResult> {
    let mut scheduler = schedulers::build(config, *cluster)?;
    let total = cluster.total();

    let mut queue = BinaryHeap::with_capacity(requests.len() * 2);
    let mut times = EventTimes::default();
    for (index, req) in requests.iter().enumerate() {
        times.insert(req.submit_time);
        queue.push(Reverse(Event {
            time: req.submit_time,
            kind: EventKind::Arrival,
            request_id: req.id,
            sequence: index as u64,
            revision: 0,
        }));
    }
    let mut sequence = requests.len() as u64;

    let mut records: BTreeMap<u64, AppRecord> = BTreeMap::new();
    let mut rejected = Vec::new();
    let mut scheduled: BTreeMap<u64, u64> = BTreeMap::new();
    let mut series = vec![SeriesPoint { time: 0.0, cpu_allocated: 0.0, ram_allocated: 0.0, pending: 0, running: 0 }];
    let mut makespan: f64 = 0.0;

    while let Some(Reverse(event)) = queue.pop() {
        let now = event.time;
        if event.kind == EventKind::Departure {
            let current = scheduler.state().run(event.request_id).map(|r| r.revision);
            if current != Some(event.revision) {
                continue;
            }
        }
        scheduler.state_mut().advance(now)?;

        match event.kind {
            EventKind::Arrival => {
                let req = requests[event.sequence as usize].clone();
                let record = AppRecord {
                    id: req.id,
                    app_class: req.app_class,
                    priority_class: req.priority_class,
                    submit_time: req.submit_time,
                    start_time: None,
                    finish_time: None,
                    n_core: req.n_core,
                    n_elastic: req.n_elastic,
                    nominal_runtime: req.nominal_runtime,
                };
                match scheduler.on_arrival(req, now) {
                    Ok(_) => {
                        records.insert(record.id, record);
                    }
                    Err(Error::Rejected { id, reason }) => rejected.push(Rejection { id, reason }),
                    Err(e) => return Err(e),
                }
            }
            EventKind::Departure => {
                let id = event.request_id;
                let run = scheduler.state().run(id).cloned().ok_or(Error::NotServing(id))?;
                observer.on_departure(&run, now);
                scheduler.on_departure(id, now)?;
                scheduled.remove(&id);
                let record = records.get_mut(&id).ok_or(Error::Invariant(format!("no record for {id}")))?;
                record.start_time = Some(run.start_time);
                record.finish_time = Some(now);
                makespan = makespan.max(now);
            }
        }

        let state = scheduler.state();
        for run in state.runs() {
            if scheduled.get(&run.request_id) != Some(&run.revision) {
                scheduled.insert(run.request_id, run.revision);
                let window = 0.5 * work_tolerance(run.total_work) / run.rate();
                let time = times.snap(next_departure(run, now), now, window);
                times.insert(time);
                queue.push(Reverse(Event {
                    time,
                    kind: EventKind::Departure,
                    request_id: run.request_id,
                    sequence,
                    revision: run.revision,
                }));
                sequence += 1;
            }
        }

        let allocated = state.allocated();
        let point = SeriesPoint {
            time: now,
            cpu_allocated: allocated.cpu / total.cpu,
            ram_allocated: allocated.ram / total.ram,
            pending: state.pending_len(),
            running: state.serving().len(),
        };
        match series.last_mut() {
            Some(last) if last.time == now => *last = point,
            _ => series.push(point),
        }
        makespan = makespan.max(now);
        observer.after_event(&event, state);
    }

    let state = scheduler.state();
    if !state.is_idle() {
        let blocked = state
            .priority_waiting()
            .first()
            .or(state.waiting().first())
            .or(state.serving().first())
            .copied()
            .unwrap_or_default();
        return Err(Error::NoProgress { id: blocked });
    }

    Ok(SimResult {
        meta: RunMeta { seed: None, scheduler: *config, cluster: *cluster },
        records: records.into_values().collect(),
        rejected,
        series,
        makespan,
    })
}

/// Pending event times, keyed by bit pattern (monotone for non-negative floats).
#[derive(Default)]
struct EventTimes(BTreeSet<u64>);

impl EventTimes {
    fn insert(&mut self, time: f64) {
        self.0.insert(time.max(0.0).to_bits());
    }

    /// The known time in `[time - window, time + window]` closest to `time`,
    /// never earlier than `now`; `time` itself if there is none.
    fn snap(&self, time: f64, now: f64, window: f64) -> f64 {
        let lo = (time - window).max(now).max(0.0);
        let hi = (time + window).max(lo);
        let pending = self.0.range(lo.to_bits()..=hi.to_bits()).map(|bits| f64::from_bits(*bits));
        let near_now = ((now - time).abs() <= window).then_some(now);
        pending
            .chain(near_now)
            .min_by(|a, b| (a - time).abs().total_cmp(&(b - time).abs()))
            .unwrap_or(time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ResourceVector;
    use crate::policy::PolicyId;
    use crate::schedulers::SchedulerKind;

    fn four_requests() -> Vec<RequestSpec> {
        [4, 2, 5, 2]
            .iter()
            .enumerate()
            .map(|(i, e)| RequestSpec {
                id: i as u64 + 1,
                submit_time: 0.0,
                app_class: AppClass::BatchElastic,
                priority_class: 0,
                n_core: 3,
                n_elastic: *e,
                per_component: ResourceVector::new(1.0, 1.0),
                nominal_runtime: 10.0,
            })
            .collect()
    }

    fn finishes(kind: SchedulerKind) -> Vec<f64> {
        let cluster = ClusterSpec::new(1, 10.0, 10.0).unwrap();
        let config = SchedulerConfig::new(kind, PolicyId::FIFO, false).unwrap();
        let result = run(&four_requests(), &config, &cluster).unwrap();
        result.records.iter().map(|r| r.finish_time.unwrap()).collect()
    }

    fn assert_close(actual: &[f64], expected: &[f64]) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() < 1e-9, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn four_request_instance_per_scheduler() {
        assert_close(&finishes(SchedulerKind::Rigid), &[10.0, 20.0, 30.0, 40.0]);
        assert_close(&finishes(SchedulerKind::Malleable), &[10.0, 14.0, 21.5, 31.5]);
        assert_close(&finishes(SchedulerKind::Flexible), &[10.0, 14.0, 158.0 / 7.0, 192.0 / 7.0]);
    }

    #[test]
    fn departures_precede_arrivals_at_equal_time() {
        let dep = Event { time: 1.0, kind: EventKind::Departure, request_id: 1, sequence: 9, revision: 0 };
        let arr = Event { time: 1.0, kind: EventKind::Arrival, request_id: 2, sequence: 0, revision: 0 };
        assert!(dep < arr);
        let earlier = Event { time: 0.5, ..arr };
        assert!(earlier < dep);
    }

    #[test]
    fn empty_workload() {
        let cluster = ClusterSpec::new(1, 10.0, 10.0).unwrap();
        let config = SchedulerConfig::new(SchedulerKind::Flexible, PolicyId::FIFO, false).unwrap();
        let result = run(&[], &config, &cluster).unwrap();
        assert!(result.records.is_empty());
        assert_eq!(result.makespan, 0.0);
        assert_eq!(result.series.len(), 1);
    }

    #[test]
    fn rejected_requests_are_recorded_and_skipped() {
        let cluster = ClusterSpec::new(1, 10.0, 10.0).unwrap();
        let mut reqs = four_requests();
        reqs[1].n_core = 11;
        let config = SchedulerConfig::new(SchedulerKind::Flexible, PolicyId::FIFO, false).unwrap();
        let result = run(&reqs, &config, &cluster).unwrap();
        assert_eq!(result.rejected.len(), 1);
        assert_eq!(result.rejected[0].id, 2);
        assert_eq!(result.records.len(), 3);
    }

    #[test]
    fn duplicate_ids_are_fatal() {
        let cluster = ClusterSpec::new(1, 10.0, 10.0).unwrap();
        let mut reqs = four_requests();
        reqs[3].id = 1;
        let config = SchedulerConfig::new(SchedulerKind::Rigid, PolicyId::FIFO, false).unwrap();
        assert!(matches!(run(&reqs, &config, &cluster), Err(Error::DuplicateRequest(1))));
    }

    #[test]
    fn single_request_runs_for_its_nominal_runtime() {
        let cluster = ClusterSpec::new(1, 10.0, 10.0).unwrap();
        let mut req = four_requests().remove(0);
        req.submit_time = 3.0;
        for kind in [SchedulerKind::Rigid, SchedulerKind::Malleable, SchedulerKind::Flexible] {
            let config = SchedulerConfig::new(kind, PolicyId::FIFO, false).unwrap();
            let result = run(std::slice::from_ref(&req), &config, &cluster).unwrap();
            assert_eq!(result.records[0].start_time, Some(3.0));
            assert_eq!(result.records[0].finish_time, Some(13.0));
        }
    }

    #[test]
    fn departure_times_snap_onto_nearby_events() {
        let mut times = EventTimes::default();
        times.insert(6.0);
        times.insert(9.0);
        assert_eq!(times.snap(6.000000000000001, 4.3, 1e-9), 6.0);
        assert_eq!(times.snap(5.999999999999999, 4.3, 1e-9), 6.0);
        assert_eq!(times.snap(6.1, 4.3, 1e-9), 6.1);
        assert_eq!(times.snap(4.300000000000001, 4.3, 1e-9), 4.3);
        assert_eq!(times.snap(8.9999, 4.3, 1e-9), 8.9999);
    }
}
