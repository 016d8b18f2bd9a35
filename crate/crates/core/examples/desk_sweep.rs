//! Runs the default desk workload through several scheduler/policy pairs and
//! prints median and mean turnaround per seed.
//!
//! cargo run --release -p flexsched --example desk_sweep -- [n_seeds]

use std::time::Instant;

use flexsched::metrics::{allocation_stats, app_metrics, summarize};
use flexsched::workload::{generate, WorkloadSpec};
use flexsched::{run, ClusterSpec, SchedulerConfig, SchedulerKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let cluster = ClusterSpec::new(10, 32.0, 131072.0)?;
    let cells = [
        ("rigid", "fifo"),
        ("malleable", "fifo"),
        ("flexible", "fifo"),
        ("flexible", "sjf"),
        ("flexible", "sjf-2d"),
        ("flexible", "sjf-3d"),
        ("flexible", "srpt1-2d"),
        ("flexible", "srpt1-3d"),
        ("flexible", "srpt2-2d"),
        ("flexible", "hrrn-2d"),
    ];
    for seed in 1..=seeds {
        let requests = generate(&WorkloadSpec::desk_batch(2000, seed), &cluster)?;
        for (kind, policy) in cells {
            let config = SchedulerConfig::new(kind.parse::<SchedulerKind>()?, policy.parse()?, false)?;
            let started = Instant::now();
            let result = run(&requests, &config, &cluster)?;
            let turnaround: Vec<f64> = app_metrics(&result)?.iter().map(|m| m.turnaround).collect();
            let s = summarize(&turnaround, None)?;
            let alloc = allocation_stats(&result);
            println!(
                "seed {seed} {:<24} p50 {:>10.1} mean {:>10.1} cpu {:.3} ram {:.3} ({:.2?})",
                config.label(),
                s.p50,
                s.mean,
                alloc.cpu.mean,
                alloc.ram.mean,
                started.elapsed()
            );
        }
    }
    Ok(())
}
