//! `flexsched` command-line driver.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
//! 3 simulation error in at least one cell.

mod config;
mod genload;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flexsched::workload::generate;
use flexsched::{PolicyId, SchedulerKind};

use config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "flexsched", version, about = "Simulate flexible scheduling of analytic applications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic workload and write it as a trace CSV.
    Genload {
        #[command(flatten)]
        common: Common,
        /// Number of applications; overrides `workload.spec.n_apps`.
        #[arg(long)]
        n_apps: Option<usize>,
    },
    /// Run every scheduler/policy/seed cell and write per-cell results.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Collect result cells and write report.csv and comparison.csv.
    Report {
        #[command(flatten)]
        common: Common,
        /// Label of the reference cell, e.g. `rigid/fifo`; defaults to the first cell.
        #[arg(long)]
        baseline: Option<String>,
        /// Result directories to scan; defaults to the configured output directory.
        dirs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (for genload: the trace file).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long = "scheduler")]
    schedulers: Vec<SchedulerKind>,
    #[arg(long = "policy")]
    policies: Vec<PolicyId>,
    #[arg(long)]
    preemption: Option<Switch>,
    /// Trace CSV to replay instead of generating a workload.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Common {
    fn load(self) -> Result<ExperimentConfig, Failure> {
        let mut config = ExperimentConfig::load(self.config.as_deref()).map_err(Failure::Config)?;
        config.apply(Overrides {
            out: self.out,
            seeds: self.seeds,
            schedulers: self.schedulers,
            policies: self.policies,
            preemption: self.preemption.map(|s| matches!(s, Switch::On)),
            trace: self.trace,
        });
        Ok(config)
    }
}

#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Simulation(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Genload { common, n_apps } => genload_cmd(common, n_apps),
        Command::Simulate { common, jobs } => simulate_cmd(common, jobs),
        Command::Report { common, baseline, dirs } => report_cmd(common, baseline, dirs),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Simulation(e)) => {
            eprintln!("simulation error: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn genload_cmd(common: Common, n_apps: Option<usize>) -> Result<(), Failure> {
    let out = common.out.clone().ok_or_else(|| Failure::Config(anyhow::anyhow!("genload needs --out FILE")))?;
    let config = common.load()?;
    let check = || -> anyhow::Result<_> {
        if config.workload.trace.is_some() {
            bail!("genload generates a workload; drop `trace`");
        }
        if config.seeds.len() != 1 {
            bail!("genload takes exactly one seed, got {}", config.seeds.len());
        }
        let mut spec = config.workload_spec();
        spec.seed = config.seeds[0];
        if let Some(n) = n_apps {
            spec.n_apps = n;
        }
        spec.validate()?;
        Ok((spec, config.cluster.spec()?))
    };
    let (spec, cluster) = check().map_err(Failure::Config)?;
    let requests = generate(&spec, &cluster).map_err(|e| Failure::Config(e.into()))?;
    genload::write(&out, &requests)?;
    print!("{}", genload::summary(&requests));
    println!("wrote {}", out.display());
    Ok(())
}

fn simulate_cmd(common: Common, jobs: Option<usize>) -> Result<(), Failure> {
    let config = common.load()?;
    config.validate().map_err(Failure::Config)?;
    let cluster = config.cluster.spec().map_err(Failure::Config)?;
    let workloads = simulate::prepare_workloads(&config, &cluster).map_err(Failure::Config)?;
    let cells = simulate::plan(&config, &workloads);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().context("starting worker pool")?;
    let outcomes = pool.install(|| simulate::run_cells(&cells, &cluster));

    for (dir, mean) in simulate::headline(&outcomes) {
        match mean {
            Some(m) => println!("{:<60} mean turnaround {m:.3}", dir.display()),
            None => println!("{:<60} failed", dir.display()),
        }
    }
    let failed: Vec<_> = outcomes.iter().filter(|o| o.error.is_some()).collect();
    if let Some(first) = failed.first() {
        return Err(Failure::Simulation(anyhow::anyhow!(
            "{} of {} cells failed; first: {}: {}",
            failed.len(),
            outcomes.len(),
            first.dir.display(),
            first.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(())
}

fn report_cmd(common: Common, baseline: Option<String>, dirs: Vec<PathBuf>) -> Result<(), Failure> {
    let explicit_out = common.out.clone();
    let config = common.load()?;
    let (roots, dest) = if dirs.is_empty() {
        (vec![config.out.clone()], config.out.clone())
    } else {
        let dest = explicit_out.unwrap_or_else(|| dirs[0].clone());
        (dirs, dest)
    };
    let cells = report::collect(&roots).map_err(Failure::Config)?;
    let rows = report::compare(&cells, baseline.as_deref()).map_err(Failure::Config)?;
    std::fs::create_dir_all(&dest).with_context(|| format!("creating {}", dest.display()))?;
    report::write_report(&cells, &dest)?;
    report::write_comparison(&rows, &dest)?;
    report::print_headline(&rows);
    println!("{} cells; wrote {} and {}", cells.len(), dest.join(report::REPORT_FILE).display(), dest.join(report::COMPARISON_FILE).display());
    Ok(())
}
