//! Per-application metrics and their summaries.
//!
//! Quantiles of plain samples interpolate linearly between order statistics
//! (`h = (n - 1) q`). Time-weighted quantiles use the step inverse of the
//! weighted distribution: the smallest value whose cumulative weight reaches
//! `q` of the total. Box-plot whiskers are reported as p5 and p95.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::AppClass;
use crate::engine::SimResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppMetrics {
    pub id: u64,
    pub app_class: AppClass,
    pub submit_time: f64,
    pub start_time: f64,
    pub finish_time: f64,
    /// finish - submit
    pub turnaround: f64,
    /// start - submit
    pub queuing: f64,
    /// finish - start
    pub effective_runtime: f64,
    /// effective runtime / nominal runtime; 1 means the request ran at full width throughout.
    pub slowdown: f64,
}

pub fn app_metrics(result: &SimResult) -> Result<Vec<AppMetrics>> {
    result
        .records
        .iter()
        .map(|r| {
            let (Some(start), Some(finish)) = (r.start_time, r.finish_time) else {
                return Err(Error::Metrics(format!("request {} did not complete", r.id)));
            };
            let queuing = start - r.submit_time;
            let effective_runtime = finish - start;
            Ok(AppMetrics {
                id: r.id,
                app_class: r.app_class,
                submit_time: r.submit_time,
                start_time: start,
                finish_time: finish,
                turnaround: queuing + effective_runtime,
                queuing,
                effective_runtime,
                slowdown: effective_runtime / r.nominal_runtime,
            })
        })
        .collect()
}

pub fn by_class(metrics: &[AppMetrics]) -> BTreeMap<AppClass, Vec<AppMetrics>> {
    let mut groups: BTreeMap<AppClass, Vec<AppMetrics>> = BTreeMap::new();
    for m in metrics {
        groups.entry(m.app_class).or_default().push(*m);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

impl Summary {
    pub const STATISTICS: [&'static str; 9] = ["count", "mean", "min", "p5", "p25", "p50", "p75", "p95", "max"];

    pub fn get(&self, statistic: &str) -> Option<f64> {
        Some(match statistic {
            "count" => self.count as f64,
            "mean" => self.mean,
            "min" => self.min,
            "p5" => self.p5,
            "p25" => self.p25,
            "p50" => self.p50,
            "p75" => self.p75,
            "p95" => self.p95,
            "max" => self.max,
            _ => return None,
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        Self::STATISTICS.iter().map(move |s| (*s, self.get(s).expect("known statistic")))
    }

    fn constant(value: f64) -> Self {
        Self { count: 1, mean: value, min: value, p5: value, p25: value, p50: value, p75: value, p95: value, max: value }
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn weighted_quantile(pairs: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let target = q * total;
    let mut acc = 0.0;
    for (value, weight) in pairs {
        acc += weight;
        if acc >= target - 1e-12 * total {
            return *value;
        }
    }
    pairs[pairs.len() - 1].0
}

pub fn summarize(values: &[f64], weights: Option<&[f64]>) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Metrics("cannot summarize an empty sample".into()));
    }
    if let Some(w) = weights {
        if w.len() != values.len() {
            return Err(Error::Metrics("values and weights differ in length".into()));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Metrics("weights must be finite and non-negative".into()));
        }
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(w.iter().copied()).filter(|(_, w)| *w > 0.0).collect();
        if !pairs.is_empty() {
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = pairs.iter().map(|(_, w)| w).sum();
            let mean = pairs.iter().map(|(v, w)| v * w).sum::<f64>() / total;
            let min = pairs[0].0;
            let max = pairs[pairs.len() - 1].0;
            return Ok(Summary {
                count: values.len(),
                mean: mean.clamp(min, max),
                min,
                p5: weighted_quantile(&pairs, total, 0.05),
                p25: weighted_quantile(&pairs, total, 0.25),
                p50: weighted_quantile(&pairs, total, 0.50),
                p75: weighted_quantile(&pairs, total, 0.75),
                p95: weighted_quantile(&pairs, total, 0.95),
                max,
            });
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(Summary {
        count: sorted.len(),
        mean: mean.clamp(min, max),
        min,
        p5: quantile(&sorted, 0.05),
        p25: quantile(&sorted, 0.25),
        p50: quantile(&sorted, 0.50),
        p75: quantile(&sorted, 0.75),
        p95: quantile(&sorted, 0.95),
        max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRatio {
    pub statistic: String,
    pub a: f64,
    pub b: f64,
    /// `b / a`; absent when `a` is zero.
    pub ratio: Option<f64>,
}

pub fn compare(a: &Summary, b: &Summary) -> Vec<StatRatio> {
    a.entries()
        .zip(b.entries())
        .map(|((stat, va), (_, vb))| StatRatio {
            statistic: stat.to_owned(),
            a: va,
            b: vb,
            ratio: (va != 0.0).then(|| vb / va),
        })
        .collect()
}

/// Piecewise-constant series segments `(value, duration)` over `[start, makespan]`.
fn segments(result: &SimResult, value: impl Fn(&crate::engine::SeriesPoint) -> f64) -> (Vec<f64>, Vec<f64>) {
    let start = result.records.iter().map(|r| r.submit_time).fold(f64::INFINITY, f64::min);
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (i, p) in result.series.iter().enumerate() {
        let end = result.series.get(i + 1).map_or(result.makespan, |next| next.time);
        let from = p.time.max(start);
        if end > from {
            values.push(value(p));
            weights.push(end - from);
        }
    }
    (values, weights)
}

fn time_weighted(result: &SimResult, value: impl Fn(&crate::engine::SeriesPoint) -> f64) -> Summary {
    let (values, weights) = segments(result, value);
    if values.is_empty() {
        return Summary::constant(0.0);
    }
    summarize(&values, Some(&weights)).expect("non-empty weighted sample")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationStats {
    pub cpu: Summary,
    pub ram: Summary,
}

/// Time-weighted distribution of the allocated fraction in each dimension.
pub fn allocation_stats(result: &SimResult) -> AllocationStats {
    AllocationStats {
        cpu: time_weighted(result, |p| p.cpu_allocated),
        ram: time_weighted(result, |p| p.ram_allocated),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub pending: Summary,
    pub running: Summary,
}

/// Time-weighted distribution of the pending and running queue lengths.
pub fn queue_stats(result: &SimResult) -> QueueStats {
    QueueStats {
        pending: time_weighted(result, |p| p.pending as f64),
        running: time_weighted(result, |p| p.running as f64),
    }
}

/// One `(metric, class, statistic, value)` line of a summary report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub class: String,
    pub statistic: String,
    pub value: f64,
}

/// Label used for rows that aggregate every class.
pub const ALL_CLASSES: &str = "all";
/// Label used for cluster-level rows.
pub const CLUSTER: &str = "cluster";

pub fn summary_report(result: &SimResult) -> Result<Vec<ReportRow>> {
    let metrics = app_metrics(result)?;
    let mut rows = Vec::new();
    let mut push = |metric: &str, class: &str, summary: &Summary| {
        for (statistic, value) in summary.entries() {
            rows.push(ReportRow { metric: metric.into(), class: class.into(), statistic: statistic.into(), value });
        }
    };

    let mut groups: Vec<(&str, Vec<AppMetrics>)> = vec![(ALL_CLASSES, metrics.clone())];
    groups.extend(by_class(&metrics).into_iter().map(|(c, m)| (c.label(), m)));
    for (class, group) in &groups {
        if group.is_empty() {
            continue;
        }
        let pick = |f: fn(&AppMetrics) -> f64| group.iter().map(f).collect::<Vec<_>>();
        push("turnaround", class, &summarize(&pick(|m| m.turnaround), None)?);
        push("queuing", class, &summarize(&pick(|m| m.queuing), None)?);
        push("slowdown", class, &summarize(&pick(|m| m.slowdown), None)?);
    }

    let alloc = allocation_stats(result);
    push("allocation_cpu", CLUSTER, &alloc.cpu);
    push("allocation_ram", CLUSTER, &alloc.ram);
    let queues = queue_stats(result);
    push("pending", CLUSTER, &queues.pending);
    push("running", CLUSTER, &queues.running);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ClusterSpec;
    use crate::engine::{AppRecord, RunMeta, SeriesPoint};
    use crate::schedulers::{SchedulerConfig, SchedulerKind};

    #[test]
    fn median_interpolates() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0], None).unwrap();
        assert_eq!(s.p50, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.p25, 1.75);
    }

    #[test]
    fn single_value_summary() {
        let s = summarize(&[7.0], None).unwrap();
        for (_, v) in s.entries().skip(1) {
            assert_eq!(v, 7.0);
        }
    }

    #[test]
    fn empty_summary_is_an_error() {
        assert!(summarize(&[], None).is_err());
    }

    #[test]
    fn weighted_summary() {
        // 0.0 for 3 time units, 1.0 for 1
        let s = summarize(&[0.0, 1.0], Some(&[3.0, 1.0])).unwrap();
        assert_eq!(s.mean, 0.25);
        assert_eq!(s.p50, 0.0);
        assert_eq!(s.p75, 0.0);
        assert_eq!(s.p95, 1.0);
    }

    #[test]
    fn compare_reports_b_over_a() {
        let a = summarize(&[18.5], None).unwrap();
        let b = summarize(&[25.0], None).unwrap();
        let rows = compare(&a, &b);
        let mean = rows.iter().find(|r| r.statistic == "mean").unwrap();
        assert!((mean.ratio.unwrap() - 25.0 / 18.5).abs() < 1e-12);
        let zero = compare(&summarize(&[0.0], None).unwrap(), &b);
        assert!(zero.iter().all(|r| r.statistic == "count" || r.ratio.is_none()));
    }

    fn result(records: Vec<AppRecord>, series: Vec<SeriesPoint>, makespan: f64) -> SimResult {
        SimResult {
            meta: RunMeta {
                seed: None,
                scheduler: SchedulerConfig::new(SchedulerKind::Flexible, crate::PolicyId::FIFO, false).unwrap(),
                cluster: ClusterSpec::new(1, 10.0, 10.0).unwrap(),
            },
            records,
            rejected: vec![],
            series,
            makespan,
        }
    }

    fn record(id: u64, submit: f64, start: Option<f64>, finish: Option<f64>) -> AppRecord {
        AppRecord {
            id,
            app_class: AppClass::BatchElastic,
            priority_class: 0,
            submit_time: submit,
            start_time: start,
            finish_time: finish,
            n_core: 1,
            n_elastic: 0,
            nominal_runtime: 5.0,
        }
    }

    #[test]
    fn immediate_full_width_request() {
        let r = result(vec![record(1, 2.0, Some(2.0), Some(7.0))], vec![], 7.0);
        let m = app_metrics(&r).unwrap();
        assert_eq!(m[0].queuing, 0.0);
        assert_eq!(m[0].slowdown, 1.0);
        assert_eq!(m[0].turnaround, 5.0);
    }

    #[test]
    fn incomplete_request_is_an_error() {
        let r = result(vec![record(1, 0.0, Some(1.0), None)], vec![], 7.0);
        assert!(app_metrics(&r).is_err());
    }

    #[test]
    fn empty_workload_allocation_is_zero() {
        let r = result(vec![], vec![SeriesPoint { time: 0.0, cpu_allocated: 0.0, ram_allocated: 0.0, pending: 0, running: 0 }], 0.0);
        let a = allocation_stats(&r);
        assert_eq!(a.cpu.max, 0.0);
        assert_eq!(a.ram.mean, 0.0);
    }
}
