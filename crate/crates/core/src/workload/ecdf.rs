use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-function empirical distribution given as `(value, cumulative probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct EmpiricalDistribution {
    points: Vec<(f64, f64)>,
}

impl EmpiricalDistribution {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Distribution(msg));
        let Some(&(_, last)) = points.last() else {
            return bad("table is empty".into());
        };
        if last != 1.0 {
            return bad(format!("last cumulative probability is {last}, expected 1.0"));
        }
        if points[0].1 <= 0.0 {
            return bad("first cumulative probability must be positive".into());
        }
        for pair in points.windows(2) {
            let ((v0, c0), (v1, c1)) = (pair[0], pair[1]);
            if c1 <= c0 {
                return bad(format!("cumulative probabilities must strictly increase ({c0} then {c1})"));
            }
            if v1 < v0 {
                return bad(format!("values must be non-decreasing ({v0} then {v1})"));
            }
        }
        if points.iter().any(|(v, _)| !v.is_finite()) {
            return bad("values must be finite".into());
        }
        Ok(Self { points })
    }

    /// Builds a table from `(value, probability mass)` pairs.
    pub fn from_masses(masses: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = masses.iter().map(|(_, m)| m).sum();
        let mut acc = 0.0;
        let mut points = Vec::with_capacity(masses.len());
        for (i, (value, mass)) in masses.iter().enumerate() {
            acc += mass / total;
            let cum = if i + 1 == masses.len() { 1.0 } else { acc };
            points.push((*value, cum));
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Probability mass of each table entry.
    pub fn masses(&self) -> Vec<(f64, f64)> {
        let mut prev = 0.0;
        self.points
            .iter()
            .map(|(v, c)| {
                let m = c - prev;
                prev = *c;
                (*v, m)
            })
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.points[0].0
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn mean(&self) -> f64 {
        self.masses().iter().map(|(v, m)| v * m).sum()
    }

    /// Inverse-transform sample: smallest value whose cumulative probability is `>= u`.
    pub fn sample(&self, u: f64) -> f64 {
        let idx = self.points.partition_point(|(_, c)| *c < u);
        self.points[idx.min(self.points.len() - 1)].0
    }
}

impl TryFrom<Vec<(f64, f64)>> for EmpiricalDistribution {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<EmpiricalDistribution> for Vec<(f64, f64)> {
    fn from(value: EmpiricalDistribution) -> Self {
        value.points
    }
}

/// Convenience wrapper over [`EmpiricalDistribution::sample`].
pub fn sample_ecdf(dist: &EmpiricalDistribution, u: f64) -> f64 {
    dist.sample(u)
}
