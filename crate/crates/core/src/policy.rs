//! Sorting disciplines for the waiting lines and the serving set.
//!
//! A policy turns a request (plus its run state, once admitted) into a
//! [`SortKey`]. Keys are recomputed at every scheduling event, so time-varying
//! policies (HRRN, SRPT) are re-evaluated at arrivals and departures only.
//!
//! Size definitions:
//!
//! | dimensionality | size of a request                               |
//! |----------------|-------------------------------------------------|
//! | 1d             | 1                                               |
//! | 2d             | number of components                            |
//! | 3d             | sum over components of `cpu * ram`              |
//!
//! SJF uses `runtime * size`, SRPT uses `remaining runtime * size`, and HRRN
//! uses `(1 + wait / runtime) * size`. SRPT2 counts only the components that
//! are not yet allocated. HRRN is served largest key first; every other family
//! smallest key first.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{RequestSpec, RunState, EPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyFamily {
    Fifo,
    Sjf,
    Srpt1,
    Srpt2,
    Hrrn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimensionality {
    D1,
    D2,
    D3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PolicyId {
    pub family: PolicyFamily,
    pub dim: Dimensionality,
}

impl PolicyId {
    pub const FIFO: PolicyId = PolicyId { family: PolicyFamily::Fifo, dim: Dimensionality::D1 };

    pub fn new(family: PolicyFamily, dim: Dimensionality) -> Self {
        let dim = if family == PolicyFamily::Fifo { Dimensionality::D1 } else { dim };
        Self { family, dim }
    }

    /// Every distinct policy: FIFO plus each sized family in 1d, 2d and 3d.
    pub fn all() -> Vec<PolicyId> {
        let families = [PolicyFamily::Sjf, PolicyFamily::Srpt1, PolicyFamily::Srpt2, PolicyFamily::Hrrn];
        let dims = [Dimensionality::D1, Dimensionality::D2, Dimensionality::D3];
        std::iter::once(PolicyId::FIFO)
            .chain(families.iter().flat_map(|f| dims.iter().map(|d| PolicyId::new(*f, *d))))
            .collect()
    }

    /// HRRN serves the highest response ratio first.
    pub fn descending(&self) -> bool {
        self.family == PolicyFamily::Hrrn
    }

    pub fn compare(&self, a: &SortKey, b: &SortKey) -> Ordering {
        debug_assert_eq!(a.descending, b.descending);
        a.cmp(b)
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match self.family {
            PolicyFamily::Fifo => return f.write_str("fifo"),
            PolicyFamily::Sjf => "sjf",
            PolicyFamily::Srpt1 => "srpt1",
            PolicyFamily::Srpt2 => "srpt2",
            PolicyFamily::Hrrn => "hrrn",
        };
        let dim = match self.dim {
            Dimensionality::D1 => "1d",
            Dimensionality::D2 => "2d",
            Dimensionality::D3 => "3d",
        };
        write!(f, "{family}-{dim}")
    }
}

impl FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (family, dim) = match lower.rsplit_once('-') {
            Some((family, dim)) => (family, Some(dim)),
            None => (lower.as_str(), None),
        };
        let family = match family {
            "fifo" => PolicyFamily::Fifo,
            "sjf" => PolicyFamily::Sjf,
            // plain "srpt" is accepted as srpt1
            "srpt" | "srpt1" => PolicyFamily::Srpt1,
            "srpt2" => PolicyFamily::Srpt2,
            "hrrn" => PolicyFamily::Hrrn,
            _ => return Err(Error::UnknownPolicy(s.to_owned())),
        };
        let dim = match dim {
            None | Some("1d") => Dimensionality::D1,
            Some("2d") => Dimensionality::D2,
            Some("3d") => Dimensionality::D3,
            Some(_) => return Err(Error::UnknownPolicy(s.to_owned())),
        };
        Ok(PolicyId::new(family, dim))
    }
}

impl TryFrom<String> for PolicyId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<PolicyId> for String {
    fn from(value: PolicyId) -> Self {
        value.to_string()
    }
}

/// Position of a request in a policy-ordered line. `Less` means served first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortKey {
    pub class_rank: u32,
    pub value: f64,
    pub arrival: f64,
    pub id: u64,
    pub descending: bool,
}

impl Eq for SortKey {}

impl Ord for SortKey {
    fn cmp(&self, other: &Self) -> Ordering {
        let by_value = if self.descending {
            other.value.total_cmp(&self.value)
        } else {
            self.value.total_cmp(&other.value)
        };
        other
            .class_rank
            .cmp(&self.class_rank)
            .then(by_value)
            .then(self.arrival.total_cmp(&other.arrival))
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for SortKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn sort_key(policy: PolicyId, req: &RequestSpec, run: Option<&RunState>, now: f64) -> Result<SortKey> {
    let value = match policy.family {
        PolicyFamily::Fifo => req.submit_time,
        PolicyFamily::Sjf => req.nominal_runtime * size(policy.dim, req, req.n_components()),
        PolicyFamily::Srpt1 => remaining_runtime(req, run) * size(policy.dim, req, req.n_components()),
        PolicyFamily::Srpt2 => {
            let unscheduled = req.n_components() - run.map_or(0, |r| r.granted_elastic);
            remaining_runtime(req, run) * size(policy.dim, req, unscheduled)
        }
        PolicyFamily::Hrrn => {
            let wait = match run {
                Some(run) => run.start_time - req.submit_time,
                None => now - req.submit_time,
            };
            if wait < -EPS {
                return Err(Error::ClockInversion { id: req.id, now, submit: req.submit_time });
            }
            (1.0 + wait.max(0.0) / req.nominal_runtime) * size(policy.dim, req, req.n_components())
        }
    };
    if run.is_none() && now < req.submit_time - EPS {
        return Err(Error::ClockInversion { id: req.id, now, submit: req.submit_time });
    }
    Ok(SortKey {
        class_rank: req.priority_class,
        value: quantize(value),
        arrival: req.submit_time,
        id: req.id,
        descending: policy.descending(),
    })
}

/// Rounds to nine significant digits so that keys which are equal in exact
/// arithmetic compare equal and fall through to the arrival/id tie-break.
fn quantize(value: f64) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    let scale = 10f64.powi(8 - value.abs().log10().floor() as i32);
    (value * scale).round() / scale
}

fn size(dim: Dimensionality, req: &RequestSpec, services: u32) -> f64 {
    match dim {
        Dimensionality::D1 => 1.0,
        Dimensionality::D2 => services as f64,
        Dimensionality::D3 => services as f64 * req.per_component.cpu * req.per_component.ram,
    }
}

fn remaining_runtime(req: &RequestSpec, run: Option<&RunState>) -> f64 {
    match run {
        Some(run) => run.remaining_work() / req.n_components() as f64,
        None => req.nominal_runtime,
    }
}

/// Orders `requests` by policy; returns their ids, first-served first.
pub fn order(
    policy: PolicyId,
    requests: &[&RequestSpec],
    states: &BTreeMap<u64, RunState>,
    now: f64,
) -> Result<Vec<u64>> {
    let mut keyed = requests
        .iter()
        .map(|req| sort_key(policy, req, states.get(&req.id), now))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort();
    Ok(keyed.into_iter().map(|k| k.id).collect())
}
