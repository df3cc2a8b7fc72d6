//! `divtrace`: runs one experiment per invocation and writes `report.json`
//! plus CSV tables. Exit codes: 0 all checks pass, 1 a check failed,
//! 2 usage or configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use commands::Command;
use config::{ConfigError, ExperimentConfig, Resolution};

#[derive(Debug, Parser)]
#[command(name = "divtrace", version, about = "Normal traces and Gauss-Green checks for divergence-measure fields")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment config. Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the grid spacing and the epsilon schedule.
    #[arg(long, value_enum)]
    resolution: Option<Resolution>,
    /// Seed for random spot-check lattices.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(r) = cli.resolution {
        cfg.apply_resolution(r);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let reports = match commands::run(cli.command, &cfg, &cfg.output).context("experiment aborted") {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e:#}");
            return ExitCode::from(2);
        }
    };
    let mut pass = true;
    for r in &reports {
        let failed: Vec<_> = r.failures().collect();
        println!("{}: {} ({} checks)", r.command, if failed.is_empty() { "PASS" } else { "FAIL" }, r.checks.len());
        for c in failed {
            println!("  failed {}: {} > {}{}", c.name, c.value, c.bound, c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default());
        }
        pass &= r.pass();
    }
    println!("reports written to {}", cfg.output.display());
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
