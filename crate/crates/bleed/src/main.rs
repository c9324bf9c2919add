use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use bleed::output::write_artifacts;
use bleed::registry::render_list;
use bleed::{run_experiment, RayonExecutor, RunConfig};
use clap::{Parser, Subcommand};

/// Pricing adjustments as expected discounted P&L bleeds.
#[derive(Debug, Parser)]
#[command(name = "bleed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Worker threads (defaults to the number of cores).
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        threads: Option<u16>,
        /// Where to write results.json (overrides the config).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// List the available experiments.
    List,
}

fn run(config_path: PathBuf, threads: Option<u16>, output_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let config = RunConfig::load(&config_path)?;
    let dir = output_dir
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let exec = RayonExecutor::new(threads.map(usize::from)).context("cannot start worker pool")?;
    let start = Instant::now();
    let out = run_experiment(&config, &exec)?;
    let elapsed = start.elapsed().as_secs_f64();
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let written = write_artifacts(&dir, &config, &out, elapsed, exec.threads())?;
    println!(
        "{} ({:.1}s, {} threads)",
        config.experiment.name(),
        elapsed,
        exec.threads()
    );
    for line in &out.summary {
        println!("  {line}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            print!("{}", render_list());
            Ok(())
        }
        Command::Run {
            config,
            threads,
            output_dir,
        } => run(config, threads, output_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
