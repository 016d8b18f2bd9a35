use crate::domain::{Assignment, RequestSpec};
use crate::error::Result;

use super::{Line, Scheduler, SchedulerState};

/// Admits requests as soon as their core components fit and hands out the
/// remaining capacity as elastic components, in policy order, at every event.
///
/// Fit checks admit exact fits (`<=`); only the saturation guard of the
/// admission loop is strict.
#[derive(Debug, Clone)]
pub struct FlexibleScheduler {
    state: SchedulerState,
}

impl FlexibleScheduler {
    pub fn new(state: SchedulerState) -> Self {
        Self { state }
    }

    /// Admission followed by a from-scratch recomputation of elastic grants.
    pub fn rebalance(&mut self, now: f64) -> Result<Assignment> {
        rebalance(&mut self.state, now)?;
        Ok(self.state.assignment())
    }

    fn preempting_arrival(&mut self, id: u64, now: f64) -> Result<Option<Assignment>> {
        let st = &mut self.state;
        let Some(&tail) = st.serving().last() else {
            return Ok(None);
        };
        if st.key(id, now)? >= st.key(tail, now)? {
            return Ok(None);
        }
        let reclaimable = st.free() + st.granted_elastic_in_service();
        if st.req(id).core_demand().fits(&reclaimable) {
            st.admit(id, now)?;
            st.sort_serving(now)?;
            return self.rebalance(now).map(Some);
        }
        st.enqueue(id, Line::Priority, now)?;
        Ok(Some(st.assignment()))
    }
}

/// True if the head of `L` should trigger a rebalance at an arrival: either
/// the new request is the head and its core fits the free pool, or the head
/// (whoever it is) would be admitted right now.
fn head_is_admissible(st: &SchedulerState, arrived: u64) -> bool {
    let Some(&head) = st.waiting().first() else {
        return false;
    };
    let core_fits = st.req(head).core_demand().fits(&st.free());
    core_fits && (head == arrived || st.full_in_service().strictly_below(&st.total()))
}

pub(super) fn rebalance(st: &mut SchedulerState, now: f64) -> Result<()> {
    let total = st.total();
    while let Some(&head) = st.waiting().first() {
        if !st.full_in_service().strictly_below(&total) {
            break;
        }
        if (st.core_in_service() + st.req(head).core_demand()).fits(&total) {
            st.admit(head, now)?;
        } else {
            break;
        }
    }
    st.sort_serving(now)?;

    let mut avail = (total - st.core_in_service()).clamp_non_negative();
    for id in st.serving().to_vec() {
        let req = st.req(id);
        let per = req.per_component;
        let granted = avail.max_copies(&per, req.n_elastic);
        avail = (avail - per * granted).clamp_non_negative();
        st.run_mut(id).set_grant(granted);
    }
    Ok(())
}

impl Scheduler for FlexibleScheduler {
    fn state(&self) -> &SchedulerState {
        &self.state
    }

    fn state_mut(&mut self) -> &mut SchedulerState {
        &mut self.state
    }

    fn on_arrival(&mut self, req: RequestSpec, now: f64) -> Result<Assignment> {
        let core = req.core_demand();
        let id = self.state.register(req, core, now)?;
        self.state.resort(now)?;
        if self.state.preemption() {
            if let Some(assignment) = self.preempting_arrival(id, now)? {
                return Ok(assignment);
            }
        }
        self.state.enqueue(id, Line::Waiting, now)?;
        if head_is_admissible(&self.state, id) {
            return self.rebalance(now);
        }
        Ok(self.state.assignment())
    }

    fn on_departure(&mut self, id: u64, now: f64) -> Result<Assignment> {
        let st = &mut self.state;
        st.finish(id, now)?;
        st.resort(now)?;
        let total = st.total();
        while let Some(&head) = st.priority_waiting().first() {
            if (st.core_in_service() + st.req(head).core_demand()).fits(&total) {
                st.admit(head, now)?;
            } else {
                break;
            }
        }
        self.rebalance(now)
    }
}
