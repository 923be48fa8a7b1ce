//! `choquard`: experiment runner for the critical levels of the Choquard
//! equation.
//!
//! Exit status: 0 when every expected verdict holds, 1 when one fails, 2 for
//! a rejected configuration and 3 for a run-time failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Sink;
use config::{KernelChoice, Overrides, RunConfig, ValidationError};
use output::{Artifact, Manifest, Versions};

#[derive(Parser)]
#[command(
    name = "choquard",
    version,
    about = "Critical levels of the Choquard equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    kernel: Option<KernelChoice>,
    /// Nodes per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Box length.
    #[arg(long = "box", global = true)]
    extent: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// c_0, c_odd and c_nod with the verdicts of the regime.
    Levels,
    /// Nehari levels of the glued odd pair against 2 c_0.
    StrictGap,
    /// Levels across the exponents of `p_list`.
    SweepP,
    /// Notched groundstates approaching c_0 for p < 2.
    Degeneracy,
    /// Riesz kernel against its closed-form oracles.
    KernelSelftest,
    /// Action gradient against central differences.
    Gradcheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Levels => "levels",
            Command::StrictGap => "strict-gap",
            Command::SweepP => "sweep-p",
            Command::Degeneracy => "degeneracy",
            Command::KernelSelftest => "kernel-selftest",
            Command::Gradcheck => "gradcheck",
        }
    }
}

fn threads() -> Result<usize, ValidationError> {
    match std::env::var("CHOQUARD_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ValidationError::new(
                "CHOQUARD_THREADS",
                format!("`{v}` is not a positive integer"),
            )),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn reject(config_out: Option<&PathBuf>, e: &ValidationError) -> ExitCode {
    let json = serde_json::to_string_pretty(e).expect("error report serializes");
    println!("{json}");
    if let Some(dir) = config_out {
        let _ = output::write(dir, &Artifact::text("error.json", json + "\n"));
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        kernel: cli.kernel,
        grid: cli.grid,
        extent: cli.extent,
    };
    let mut config = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return reject(cli.out.as_ref(), &e),
    };
    config.apply(&overrides);
    let threads = match config.validate(name).and_then(|_| threads()) {
        Ok(t) => t,
        Err(e) => return reject(Some(&config.out), &e),
    };
    match run(cli.command, &config, threads) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{name}: a verdict failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{name}: {e:#}");
            let report = serde_json::json!({ "error": "runtime", "message": format!("{e:#}") });
            let _ = output::write(
                &config.out,
                &Artifact::text("error.json", format!("{report:#}\n")),
            );
            ExitCode::from(3)
        }
    }
}

fn run(command: Command, config: &RunConfig, threads: usize) -> Result<bool> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    std::fs::create_dir_all(&config.out)?;
    let sink = Sink::new(config.out.clone());
    let passed = match command {
        Command::Levels => commands::levels(config, &sink),
        Command::StrictGap => commands::strict_gap(config, &sink),
        Command::SweepP => commands::sweep_p(config, &sink, &pool),
        Command::Degeneracy => commands::degeneracy(config, &sink),
        Command::KernelSelftest => commands::kernel_selftest(config, &sink),
        Command::Gradcheck => commands::gradcheck(config, &sink),
    }?;
    let manifest = Manifest {
        command: command.name(),
        config,
        input_hash: output::input_hash(command.name(), config)?,
        versions: Versions::current(),
        threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        passed,
        outputs: sink.into_entries(),
    };
    output::write(&config.out, &Artifact::json("manifest.json", &manifest)?)?;
    Ok(passed)
}
