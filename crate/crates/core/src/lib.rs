//! Scheduling of analytic applications made of core and elastic components.
//!
//! The crate provides:
//!
//! * [`domain`]: resources, requests, run states and assignments;
//! * [`policy`]: FIFO, SJF, SRPT and HRRN orderings with 1d/2d/3d sizes;
//! * [`schedulers`]: the flexible scheduler plus rigid and malleable baselines;
//! * [`engine`]: the discrete-event simulation loop;
//! * [`workload`]: synthetic workload generation and the trace CSV format;
//! * [`metrics`]: turnaround, queuing, slowdown and allocation statistics.

pub mod domain;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod schedulers;
pub mod workload;

pub use domain::{AppClass, Assignment, ClusterSpec, RequestSpec, ResourceVector, RunState};
pub use engine::{run, SimResult};
pub use error::{Error, Result};
pub use policy::PolicyId;
pub use schedulers::{SchedulerConfig, SchedulerKind};
