//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.
//!
//! cargo test --release -p flexsched --test acceptance

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use flexsched::engine::run_observed;
use flexsched::metrics::{allocation_stats, app_metrics, by_class, summarize, Summary};
use flexsched::workload::{generate, Mix, WorkloadSpec};
use flexsched::{run, AppClass, ClusterSpec, RequestSpec, SimResult};

use common::{all_configs, config, four_requests, four_requests_cluster, mean, small_workload, step_finish_times, InvariantObserver};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

type Verdict = Result<(bool, String), Box<dyn std::error::Error>>;

fn desk_cluster() -> ClusterSpec {
    ClusterSpec::new(10, 32.0, 131072.0).unwrap()
}

fn turnaround(result: &SimResult) -> Result<Summary, flexsched::Error> {
    let values: Vec<f64> = app_metrics(result)?.iter().map(|m| m.turnaround).collect();
    summarize(&values, None)
}

fn finish_times(result: &SimResult) -> BTreeMap<u64, f64> {
    result.records.iter().map(|r| (r.id, r.finish_time.unwrap_or(f64::NAN))).collect()
}

fn four_request_oracle() -> Verdict {
    let requests = four_requests();
    let cluster = four_requests_cluster();
    let expected = [
        ("rigid", 25.0, vec![10.0, 20.0, 30.0, 40.0]),
        ("malleable", 19.25, vec![10.0, 14.0, 21.5, 31.5]),
        ("flexible", 18.5, vec![10.0, 14.0, 158.0 / 7.0, 192.0 / 7.0]),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (kind, want_mean, want_finish) in expected {
        let result = run(&requests, &config(kind, "fifo", false), &cluster)?;
        let got_mean = turnaround(&result)?.mean;
        let got_finish: Vec<f64> = finish_times(&result).into_values().collect();
        let finish_ok = got_finish.len() == 4 && got_finish.iter().zip(&want_finish).all(|(a, b)| (a - b).abs() <= 1e-6);
        ok &= (got_mean - want_mean).abs() <= 1e-6 && finish_ok;
        detail.push(format!("{kind} mean {got_mean:.6} (want {want_mean})"));
    }
    Ok((ok, detail.join(", ")))
}

fn inelastic_equivalence() -> Verdict {
    let mut spec = WorkloadSpec::desk_batch(1000, 7);
    spec.mix = Mix { batch: 1.0, interactive: 0.0, batch_elastic: 0.0, batch_rigid: 1.0 };
    let requests = generate(&spec, &desk_cluster())?;
    if requests.iter().any(|r| r.n_elastic != 0) {
        return Ok((false, "generator produced elastic components".into()));
    }
    let policies = ["fifo", "sjf", "sjf-2d", "sjf-3d", "srpt1", "srpt1-2d", "srpt1-3d", "srpt2-2d", "srpt2-3d", "hrrn", "hrrn-2d", "hrrn-3d"];
    let mut worst: f64 = 0.0;
    let mut mismatched = Vec::new();
    for policy in policies {
        let rigid = run(&requests, &config("rigid", policy, false), &desk_cluster())?;
        let flexible = run(&requests, &config("flexible", policy, false), &desk_cluster())?;
        let same_shape = rigid.records.len() == flexible.records.len() && rigid.rejected.is_empty() && flexible.rejected.is_empty();
        let mut diff: f64 = if same_shape { 0.0 } else { f64::INFINITY };
        for (a, b) in rigid.records.iter().zip(&flexible.records) {
            let start = (a.start_time.unwrap_or(f64::NAN) - b.start_time.unwrap_or(f64::NAN)).abs();
            let finish = (a.finish_time.unwrap_or(f64::NAN) - b.finish_time.unwrap_or(f64::NAN)).abs();
            diff = diff.max(if a.id == b.id { start.max(finish) } else { f64::INFINITY });
            if diff.is_nan() {
                diff = f64::INFINITY;
            }
        }
        if diff > 1e-9 {
            mismatched.push(format!("{policy} ({diff:e})"));
        }
        worst = worst.max(diff);
    }
    let detail = if mismatched.is_empty() {
        format!("{} policies, 1000 requests, max |delta| {worst:e}", policies.len())
    } else {
        format!("mismatch under {}", mismatched.join(", "))
    };
    Ok((mismatched.is_empty(), detail))
}

fn desk_workload(seed: u64) -> Result<Vec<RequestSpec>, flexsched::Error> {
    generate(&WorkloadSpec::desk_batch(2000, seed), &desk_cluster())
}

fn flexible_vs_rigid() -> Verdict {
    let mut ok = true;
    let mut ratios = Vec::new();
    let mut cpu_gain = Vec::new();
    let mut ram_gain = Vec::new();
    for seed in SEEDS {
        let requests = desk_workload(seed)?;
        let rigid = run(&requests, &config("rigid", "fifo", false), &desk_cluster())?;
        let flexible = run(&requests, &config("flexible", "fifo", false), &desk_cluster())?;
        let ratio = turnaround(&flexible)?.p50 / turnaround(&rigid)?.p50;
        let (a_r, a_f) = (allocation_stats(&rigid), allocation_stats(&flexible));
        ok &= ratio <= 0.7 && a_f.cpu.mean >= a_r.cpu.mean && a_f.ram.mean >= a_r.ram.mean;
        ratios.push(ratio);
        cpu_gain.push(a_f.cpu.mean / a_r.cpu.mean - 1.0);
        ram_gain.push(a_f.ram.mean / a_r.ram.mean - 1.0);
    }
    let max_ratio = ratios.iter().cloned().fold(f64::MIN, f64::max);
    Ok((
        ok,
        format!(
            "p50 ratio max {max_ratio:.3} mean {:.3}; allocation gain cpu {:+.1}% ram {:+.1}% (mean over seeds, min cpu {:+.1}% ram {:+.1}%)",
            mean(&ratios),
            100.0 * mean(&cpu_gain),
            100.0 * mean(&ram_gain),
            100.0 * cpu_gain.iter().cloned().fold(f64::MAX, f64::min),
            100.0 * ram_gain.iter().cloned().fold(f64::MAX, f64::min),
        ),
    ))
}

struct Tally {
    label: &'static str,
    wins: usize,
    needed: usize,
}

impl Tally {
    fn new(label: &'static str, needed: usize) -> Self {
        Self { label, wins: 0, needed }
    }

    fn record(&mut self, win: bool) {
        self.wins += usize::from(win);
    }

    fn ok(&self) -> bool {
        self.wins >= self.needed
    }

    fn describe(&self, seeds: usize) -> String {
        let mark = if self.ok() { "ok" } else { "FAIL" };
        format!("{} {}/{} [{mark}]", self.label, self.wins, seeds)
    }
}

fn policy_ordering() -> Verdict {
    let policies = ["fifo", "sjf", "sjf-2d", "sjf-3d", "srpt1-2d", "srpt1-3d", "srpt2-2d", "srpt2-3d", "hrrn-2d"];
    let mut sjf_fifo = Tally::new("sjf p50 <= fifo", 8);
    let mut sjf_3d = Tally::new("sjf-3d mean <= sjf-2d", 7);
    let mut srpt_3d = Tally::new("srpt1-3d mean <= srpt1-2d", 7);
    let mut hrrn = Tally::new("hrrn-2d mean >= every 2d/3d sjf/srpt", 8);
    let mut means: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for seed in SEEDS {
        let requests = desk_workload(seed)?;
        let mut s = BTreeMap::new();
        for policy in policies {
            let summary = turnaround(&run(&requests, &config("flexible", policy, false), &desk_cluster())?)?;
            means.entry(policy).or_default().push(summary.mean);
            s.insert(policy, summary);
        }
        sjf_fifo.record(s["sjf"].p50 <= s["fifo"].p50);
        sjf_3d.record(s["sjf-3d"].mean <= s["sjf-2d"].mean);
        srpt_3d.record(s["srpt1-3d"].mean <= s["srpt1-2d"].mean);
        hrrn.record(policies[2..8].iter().all(|p| s["hrrn-2d"].mean >= s[p].mean));
    }
    let n = SEEDS.count();
    let tallies = [&sjf_fifo, &sjf_3d, &srpt_3d, &hrrn];
    let ok = tallies.iter().all(|t| t.ok());
    let mut detail: Vec<String> = tallies.iter().map(|t| t.describe(n)).collect();
    detail.push(format!(
        "mean turnaround over seeds: {}",
        means.iter().map(|(p, v)| format!("{p} {:.0}", mean(v))).collect::<Vec<_>>().join(" ")
    ));
    Ok((ok, detail.join("; ")))
}

fn median_queuing(result: &SimResult) -> Result<BTreeMap<AppClass, f64>, flexsched::Error> {
    let metrics = app_metrics(result)?;
    by_class(&metrics)
        .into_iter()
        .map(|(class, ms)| {
            let q: Vec<f64> = ms.iter().map(|m| m.queuing).collect();
            Ok((class, summarize(&q, None)?.p50))
        })
        .collect()
}

fn preemption() -> Verdict {
    let spec = WorkloadSpec { mix: Mix::default(), ..WorkloadSpec::desk_batch(2500, 1) };
    let requests = generate(&spec, &desk_cluster())?;
    let plain = median_queuing(&run(&requests, &config("flexible", "srpt1", false), &desk_cluster())?)?;
    let preempt = median_queuing(&run(&requests, &config("flexible", "srpt1", true), &desk_cluster())?)?;
    let q = |m: &BTreeMap<AppClass, f64>, c| m.get(&c).copied().unwrap_or(f64::NAN);
    let (int_off, int_on) = (q(&plain, AppClass::Interactive), q(&preempt, AppClass::Interactive));
    let interactive_ok = int_on <= 0.1 * int_off;
    let mut detail = vec![format!("interactive p50 queuing {int_off:.1} -> {int_on:.1}")];
    let mut batch_ok = true;
    for class in [AppClass::BatchElastic, AppClass::BatchRigid] {
        let (off, on) = (q(&plain, class), q(&preempt, class));
        let ok = if off == 0.0 && on == 0.0 {
            true
        } else {
            let ratio = on / off;
            (0.5..=2.0).contains(&ratio)
        };
        batch_ok &= ok;
        detail.push(format!("{} p50 queuing {off:.1} -> {on:.1}", class.label()));
    }
    Ok((interactive_ok && batch_ok, detail.join(", ")))
}

fn invariant_suite() -> Verdict {
    let configs = all_configs();
    let mut failures: Vec<String> = Vec::new();
    let mut runs = 0usize;
    let mut worst_step: f64 = 0.0;
    for seed in 0..200u64 {
        let (cluster, requests) = small_workload(seed);
        for cfg in &configs {
            runs += 1;
            let tag = format!("seed {seed} {}", cfg.label());
            let mut observer = InvariantObserver::default();
            let result = match run_observed(&requests, cfg, &cluster, &mut observer) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("{tag}: {e}"));
                    continue;
                }
            };
            if let Some(v) = observer.violations.first() {
                failures.push(format!("{tag}: {v}"));
            }
            if result.records.len() + result.rejected.len() != requests.len() {
                failures.push(format!("{tag}: requests lost"));
            }
            let again = run(&requests, cfg, &cluster)?;
            if serde_json::to_string(&result)? != serde_json::to_string(&again)? {
                failures.push(format!("{tag}: rerun differs"));
            }
            let stepped = step_finish_times(&requests, cfg, &cluster, 1e-3)?;
            let simulated = finish_times(&result);
            if stepped.len() != simulated.len() {
                failures.push(format!("{tag}: stepper finished {} of {}", stepped.len(), simulated.len()));
                continue;
            }
            for (id, t) in &simulated {
                let d = (t - stepped[id]).abs();
                worst_step = worst_step.max(d);
                if d > 1e-2 {
                    failures.push(format!("{tag}: request {id} finishes at {t} vs stepped {}", stepped[id]));
                    break;
                }
            }
        }
    }
    let detail = format!("{runs} runs, max |event - stepped| finish {worst_step:.2e}, {} failures", failures.len());
    let ok = failures.is_empty();
    let detail = match failures.first() {
        Some(first) => format!("{detail}; first: {first}"),
        None => detail,
    };
    Ok((ok, detail))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict, Option<Duration>); 6] = [
        ("1 four-request oracle", four_request_oracle, Some(Duration::from_secs(1))),
        ("2 inelastic equivalence", inelastic_equivalence, Some(Duration::from_secs(5))),
        ("3 flexible vs rigid", flexible_vs_rigid, Some(Duration::from_secs(120))),
        ("4 policy ordering", policy_ordering, None),
        ("5 preemption", preemption, None),
        ("6 invariant suite", invariant_suite, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let started = Instant::now();
        let verdict = check();
        let elapsed = started.elapsed();
        let (mut ok, mut detail) = verdict.unwrap_or_else(|e| (false, format!("error: {e}")));
        if let Some(limit) = budget {
            if elapsed > limit {
                ok = false;
                detail.push_str(&format!("; exceeded time budget {limit:?}"));
            }
        }
        failed += usize::from(!ok);
        println!("{} criterion {name}: {detail} ({elapsed:.2?})", if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
