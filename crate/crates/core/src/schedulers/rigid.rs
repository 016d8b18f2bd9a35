use crate::domain::{Assignment, RequestSpec};
use crate::error::Result;

use super::{Line, Scheduler, SchedulerState};

/// Baseline that treats every component as mandatory: a request starts only
/// when its full demand fits the free pool, and the head of the line blocks
/// everything behind it (no backfilling).
#[derive(Debug, Clone)]
pub struct RigidScheduler {
    state: SchedulerState,
}

impl RigidScheduler {
    pub fn new(state: SchedulerState) -> Self {
        Self { state }
    }

    fn admit_heads(&mut self, now: f64) -> Result<Assignment> {
        let st = &mut self.state;
        while let Some(&head) = st.waiting().first() {
            let req = st.req(head);
            let n_elastic = req.n_elastic;
            if !req.full_demand().fits(&st.free()) {
                break;
            }
            st.admit(head, now)?;
            st.run_mut(head).set_grant(n_elastic);
        }
        st.sort_serving(now)?;
        Ok(st.assignment())
    }
}

impl Scheduler for RigidScheduler {
    fn state(&self) -> &SchedulerState {
        &self.state
    }

    fn state_mut(&mut self) -> &mut SchedulerState {
        &mut self.state
    }

    fn on_arrival(&mut self, req: RequestSpec, now: f64) -> Result<Assignment> {
        let full = req.full_demand();
        let id = self.state.register(req, full, now)?;
        self.state.resort(now)?;
        self.state.enqueue(id, Line::Waiting, now)?;
        self.admit_heads(now)
    }

    fn on_departure(&mut self, id: u64, now: f64) -> Result<Assignment> {
        self.state.finish(id, now)?;
        self.state.resort(now)?;
        self.admit_heads(now)
    }
}
