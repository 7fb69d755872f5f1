//! Benchmark CLI: runs experiment configs against synthetic models
//! (`simulate`) or a labeled data file (`dataset`).
//!
//! Exit codes: 0 ok, 2 config error, 3 size-guard refusal, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rlpp_cluster::experiment::{load_labeled_matrix, run_dataset, run_experiment, ExperimentConfig};
use rlpp_cluster::Error;

#[derive(Parser)]
#[command(name = "rlpp-bench", about = "Clustering-with-missing-values benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file.
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); RLPP_WORKERS overrides the config too.
    #[arg(long)]
    workers: Option<usize>,
    /// Run exhaustive searches past the size guard.
    #[arg(long)]
    force: bool,
    /// Output directory (default `runs/`); RLPP_OUT overrides the default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic-model experiment grids from a config.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the stratified-sampling experiment on a labeled data file.
    Dataset {
        /// Delimited data file (rows = points; empty or NA = missing).
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn resolve(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf, bool), Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    } else if let Ok(w) = std::env::var("RLPP_WORKERS") {
        cfg.workers = w.parse().map_err(|_| Error::InvalidParameter {
            name: "RLPP_WORKERS",
            reason: format!("cannot parse {w:?}"),
        })?;
    }
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var("RLPP_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    Ok((cfg, out, common.force))
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::Empty(_) => 2,
        Error::SizeGuard { .. } => 3,
        Error::Io(_) => 4,
        _ => 1,
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { common } => {
            let (cfg, out, force) = resolve(&common)?;
            let summary = run_experiment(&cfg, &out, force)?;
            print_summary(&summary, &out);
        }
        Command::Dataset { file, common } => {
            let (cfg, out, force) = resolve(&common)?;
            let data = load_labeled_matrix(&file, cfg.dataset.label_column.as_deref())?;
            let summary = run_dataset(&data, &cfg, &out, force)?;
            print_summary(&summary, &out);
        }
    }
    Ok(())
}

fn print_summary(summary: &rlpp_cluster::ExperimentSummary, out: &std::path::Path) {
    println!("setup      p      method      mean_err  std_err  reps");
    for row in &summary.summary {
        println!(
            "{:<10} {:<6} {:<11} {:<9.4} {:<8.4} {}",
            format!("{}+{}", row.setup.0, row.setup.1),
            row.missing_prob,
            row.method,
            row.mean_error,
            row.std_error,
            row.reps_used
        );
    }
    println!(
        "wrote {}, {}, {}",
        out.join("runs.csv").display(),
        out.join("timings.csv").display(),
        out.join("summary.csv").display()
    );
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
