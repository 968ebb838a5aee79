//! CLI harness: `design`, `run`, `sweep`, and `verify-env` subcommands over
//! the library. All outputs are UTF-8 text with `.` decimal separators.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use nsrlsvi::harness::{cli_design, cli_run, cli_sweep, cli_verify, RunConfig};

#[derive(Parser)]
#[command(name = "nsrlsvi", version, about = "Null-space randomized value iteration harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a D-optimal design for an environment's feature set and write
    /// it as text (weight followed by coordinates, one support point per line).
    Design {
        /// Environment spec file.
        #[arg(long)]
        env: PathBuf,
        /// Certificate slack: stop once g(rho) <= d (1 + eps).
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute one seeded run and write metrics.csv, summary.txt and
    /// schedule.txt. `NSRLSVI_SEED` overrides the config seed.
    Run {
        /// Run configuration file (flat key = value).
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several configs concurrently and aggregate regret curves into
    /// sweep.csv. Exits nonzero if any child run failed.
    Sweep {
        /// Run configuration files.
        configs: Vec<PathBuf>,
        /// Replicate each config across this comma-separated seed list.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value_t = 4)]
        parallel: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the environment verification report: completeness residuals,
    /// gamma, the design certificate, and the linear-optimization radius.
    VerifyEnv {
        #[arg(long)]
        env: PathBuf,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for tok in spec.split(',') {
        let tok = tok.trim();
        if let Some((a, b)) = tok.split_once("..") {
            let a: u64 = a.parse().context("bad seed range start")?;
            let b: u64 = b.parse().context("bad seed range end")?;
            seeds.extend(a..b);
        } else {
            seeds.push(tok.parse().context("bad seed")?);
        }
    }
    Ok(seeds)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Design { env, eps, out } => {
            let design = cli_design(&env, eps, &out)?;
            println!(
                "design written to {}: support {} points, log det = {}",
                out.display(),
                design.support_size(),
                design.log_det()
            );
        }
        Command::Run { config, out } => {
            let mut run_config = RunConfig::load(&config)?;
            if let Some(dir) = out {
                run_config.out_dir = dir;
            }
            let start = Instant::now();
            let result = cli_run(&run_config)?;
            eprintln!("run finished in {:.3?}", start.elapsed());
            println!(
                "rounds = {}, final cumulative regret = {}, span failures = {}/{}, outputs in {}",
                result.metrics.len(),
                result.final_cum_regret(),
                result.span_failures,
                result.span_budget,
                run_config.out_dir.display()
            );
        }
        Command::Sweep {
            configs,
            seeds,
            parallel,
            out,
        } => {
            let mut expanded = Vec::new();
            for path in &configs {
                let base = RunConfig::load(path)?;
                match &seeds {
                    None => expanded.push(base),
                    Some(spec) => {
                        for seed in parse_seeds(spec)? {
                            let mut c = base.clone();
                            c.seed = seed;
                            expanded.push(c);
                        }
                    }
                }
            }
            let start = Instant::now();
            let report = cli_sweep(&expanded, parallel, &out)?;
            eprintln!("sweep finished in {:.3?}", start.elapsed());
            println!(
                "{} runs, {} failed, aggregate in {}",
                report.results.len(),
                report.failed,
                out.join("sweep.csv").display()
            );
            for (idx, seed, result) in &report.results {
                if let Err(e) = result {
                    eprintln!("run {idx} (seed {seed}) failed: {e}");
                }
            }
            if report.failed > 0 {
                bail!("{} run(s) failed", report.failed);
            }
        }
        Command::VerifyEnv { env, probes, seed } => {
            print!("{}", cli_verify(&env, probes, seed)?);
        }
    }
    Ok(())
}
