#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tfqkd_core::verify::run_verify;
use tfqkd_core::{analyze, expected_observables, optimize, sweep, MonteCarlo, SweepRow};

use crate::config::RunConfig;

/// Twin-field QKD key-rate simulator.
#[derive(Debug, Parser)]
#[command(name = "tfqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimised key rate over a range of distances, as CSV.
    Sweep,
    /// Optimised key rate at one distance, as CSV.
    Optimize,
    /// Monte Carlo run at a fixed operating point against the analytic model.
    Simulate,
    /// Run the invariant suites; exits nonzero if any check fails.
    Verify,
}

/// Command-line values; each overrides the matching config key.
#[derive(Debug, Args)]
struct Flags {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Distance in km for optimize, simulate and verify.
    #[arg(long = "L", global = true)]
    distance: Option<f64>,
    #[arg(long, global = true)]
    lmin: Option<f64>,
    #[arg(long, global = true)]
    lmax: Option<f64>,
    #[arg(long, global = true)]
    lstep: Option<f64>,
    /// Misalignment error.
    #[arg(long, global = true)]
    ea: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Seeded runs in the soundness suite.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads (all cores if absent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use the 0.1 dB/km channel instead of 0.2 dB/km fiber.
    #[arg(long, global = true)]
    paper_channel: bool,
    /// Upper bound on the source intensity used in the security analysis.
    #[arg(long, global = true)]
    mu_max: Option<f64>,
    /// Report bits per second at this repetition rate (Hz).
    #[arg(long, global = true)]
    per_second: Option<f64>,
    /// Corrupt the correct-click bound so the soundness check must fail.
    #[arg(long, global = true)]
    inject_fault: bool,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

impl Flags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.distance, self.distance);
        set(&mut cfg.lmin, self.lmin);
        set(&mut cfg.lmax, self.lmax);
        set(&mut cfg.lstep, self.lstep);
        set(&mut cfg.ea, self.ea);
        if self.lmin.is_some() || self.lmax.is_some() || self.lstep.is_some() {
            cfg.distances = None;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.mu_max.is_some() {
            cfg.mu_max = self.mu_max;
        }
        if self.per_second.is_some() {
            cfg.per_second = self.per_second;
        }
        cfg.paper_channel |= self.paper_channel;
        cfg.inject_fault |= self.inject_fault;
    }
}

fn load(flags: &Flags) -> Result<RunConfig> {
    let (mut cfg, lines) = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => (RunConfig::default(), Default::default()),
    };
    flags.apply(&mut cfg);
    cfg.validate(&lines)?;
    Ok(cfg)
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load(&cli.flags)?;
    if cli.flags.dump_config {
        emit(&cfg, &cfg.dump())?;
        return Ok(true);
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start the worker pool")?;
    }
    match cli.command {
        Command::Sweep => {
            let rows = sweep(
                &cfg.distance_list()?,
                &cfg.channel(0.0),
                &cfg.search_space(),
            )?;
            emit(&cfg, &output::rates_csv(&rows, cfg.per_second))?;
        }
        Command::Optimize => {
            let result = optimize(&cfg.channel(cfg.distance), &cfg.search_space())?;
            let row = SweepRow {
                distance_km: cfg.distance,
                result,
            };
            emit(&cfg, &output::rates_csv(&[row], cfg.per_second))?;
        }
        Command::Simulate => {
            let params = cfg.params(cfg.mc_windows);
            let ch = cfg.channel(cfg.distance);
            let (observed, _) = MonteCarlo::new(params, ch).run(cfg.seed)?;
            let expected = expected_observables(&params, &ch)?;
            let sim = analyze(&observed, &params)?;
            let exact = analyze(&expected, &params)?;
            emit(
                &cfg,
                &output::simulation_csv(&observed, &expected, &sim, &exact, cfg.per_second),
            )?;
        }
        Command::Verify => {
            let report = run_verify(&cfg.verify_config())?;
            emit(&cfg, &report.to_string())?;
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tfqkd: verification failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("tfqkd: {e:#}");
            ExitCode::from(2)
        }
    }
}
