//! `liquid-bench`: runs experiments described by config files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use liquid_core::cells::Family;
use liquid_core::harness::{
    self, emit_reports, gradcheck_family, load_config, profile_timing, run_experiment, run_robustness_sweep,
    ExperimentConfig, MetricsReport, GRADCHECK_TOLERANCE,
};
use liquid_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "liquid-bench", version, about = "Train and compare recurrent and liquid sequence models")]
struct Cli {
    /// Override the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train, evaluate and write reports.
    Run { config: PathBuf },
    /// As `run`, plus the noise-by-horizon robustness grid.
    Sweep { config: PathBuf },
    /// Compare median epoch time of two configs on the same task.
    Profile { config_a: PathBuf, config_b: PathBuf },
    /// Finite-difference gradient check of every cell family.
    Gradcheck {
        #[arg(long)]
        family: Option<Family>,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
}

fn load(path: &Path, cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn summarize(report: &MetricsReport) {
    if let Some(loss) = report.final_loss() {
        println!("final training loss: {loss}");
    }
    for m in &report.metrics {
        let r2 = m.metrics.r2.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:>5}: mae {:.6}  rmse {:.6}  r2 {}",
            m.split, m.metrics.mae, m.metrics.rmse, r2
        );
    }
    println!("parameters: {}", report.param_count);
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Run { config } | Command::Sweep { config } => {
            let cfg = load(config, cli)?;
            let report = if matches!(cli.command, Command::Sweep { .. }) {
                run_robustness_sweep(&cfg)?
            } else {
                run_experiment(&cfg)?
            };
            emit_reports(&report, &cfg, &cfg.output.dir)?;
            summarize(&report);
            for row in &report.robustness {
                println!("sigma {:<6} k {}  rmse {:.6}", row.sigma, row.k, row.rmse);
            }
            println!("reports written to {}", cfg.output.dir.display());
        }
        Command::Profile { config_a, config_b } => {
            let a = load(config_a, cli)?;
            let b = load(config_b, cli)?;
            let cmp = profile_timing(&a, &b)?;
            for (name, e) in [("a", &cmp.a), ("b", &cmp.b)] {
                println!(
                    "{name}: {} ({}, hidden {}, {} params) median {:.6} s/epoch over {} epochs",
                    e.family, e.solver, e.hidden, e.param_count, e.median_epoch_seconds, e.epochs
                );
            }
            println!("ratio a/b: {:.4}", cmp.ratio);
            let dir = cli.out.clone().unwrap_or_else(|| a.output.dir.clone());
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let path = dir.join("profile.json");
            let text = serde_json::to_string_pretty(&cmp)
                .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
            std::fs::write(&path, text + "\n").map_err(|e| Error::Io { path, source: e })?;
        }
        Command::Gradcheck { family, seeds } => {
            let families: Vec<Family> = family.map_or_else(|| Family::ALL.to_vec(), |f| vec![f]);
            let mut failed = Vec::new();
            for f in families {
                let r = gradcheck_family(f, *seeds)?;
                let ok = r.max_relative_error < GRADCHECK_TOLERANCE;
                println!(
                    "{:<5} max relative error {:.3e} over {} seeds: {}",
                    f,
                    r.max_relative_error,
                    r.seeds,
                    if ok { "ok" } else { "FAILED" }
                );
                if !ok {
                    failed.push(f.to_string());
                }
            }
            if !failed.is_empty() {
                eprintln!("gradient check failed for {}", failed.join(", "));
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
