use crate::domain::{Assignment, RequestSpec};
use crate::error::Result;

use super::{Line, Scheduler, SchedulerState};

/// Greedy malleable baseline: serving requests grow into free capacity in
/// policy order, then queued requests are admitted while their core fits the
/// free pool. Grants never shrink.
#[derive(Debug, Clone)]
pub struct MalleableScheduler {
    state: SchedulerState,
}

impl MalleableScheduler {
    pub fn new(state: SchedulerState) -> Self {
        Self { state }
    }

    fn fill(&mut self, now: f64) -> Result<Assignment> {
        let st = &mut self.state;
        let mut free = st.free();
        for id in st.serving().to_vec() {
            let req = st.req(id);
            let per = req.per_component;
            let n_elastic = req.n_elastic;
            let held = st.run(id).map_or(0, |r| r.granted_elastic);
            let extra = free.max_copies(&per, n_elastic - held);
            if extra > 0 {
                free = (free - per * extra).clamp_non_negative();
                st.run_mut(id).set_grant(held + extra);
            }
        }
        while let Some(&head) = st.waiting().first() {
            let req = st.req(head);
            let core = req.core_demand();
            if !core.fits(&free) {
                break;
            }
            let per = req.per_component;
            let granted = (free - core).clamp_non_negative().max_copies(&per, req.n_elastic);
            free = (free - req.demand_with(granted)).clamp_non_negative();
            st.admit(head, now)?;
            st.run_mut(head).set_grant(granted);
        }
        st.sort_serving(now)?;
        Ok(st.assignment())
    }
}

impl Scheduler for MalleableScheduler {
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
        self.state.enqueue(id, Line::Waiting, now)?;
        self.fill(now)
    }

    fn on_departure(&mut self, id: u64, now: f64) -> Result<Assignment> {
        self.state.finish(id, now)?;
        self.state.resort(now)?;
        self.fill(now)
    }
}
