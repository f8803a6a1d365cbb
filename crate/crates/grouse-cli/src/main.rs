//! `grouse`: run subspace-tracking experiments, time the update, and
//! complete low-rank matrices from entry lists.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use grouse_cli::config::{ExperimentKind, ExperimentSpec, ScheduleKind};
use grouse_cli::experiments::{complete_entries, resolve_out_dir, run_experiment};
use grouse_cli::read_entries;
use grouse_core::CompletionProblem;

#[derive(Parser)]
#[command(
    name = "grouse",
    about = "Streaming subspace tracking from partial observations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        /// Path to a key = value config file.
        config: PathBuf,
        /// Override one config key (repeatable), e.g. --set step_c=160.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides GROUSE_OUT_DIR and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time the per-step update across ambient dimensions.
    Bench {
        /// Tracked rank.
        #[arg(long, default_value_t = 10)]
        d: usize,
        /// Comma-separated ambient dimensions, strictly increasing.
        #[arg(long, default_value = "500,1000,2000,4000")]
        n: String,
        /// Fraction of coordinates observed per step.
        #[arg(long, default_value_t = 0.17)]
        density: f64,
        /// Timed steps per dimension.
        #[arg(long, default_value_t = 1500)]
        steps: u64,
        /// Untimed warmup steps per dimension.
        #[arg(long, default_value_t = 200)]
        warmup: u64,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Complete a low-rank matrix from a row,col,value entry list.
    Complete {
        /// Entry-list CSV with a row,col,value header.
        entries: PathBuf,
        /// Number of rows (default: one past the largest row index).
        #[arg(long)]
        rows: Option<usize>,
        /// Number of columns (default: one past the largest column index).
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, default_value_t = 10)]
        rank: usize,
        /// Passes over the columns.
        #[arg(long, default_value_t = 10)]
        passes: usize,
        /// Step schedule: diminishing or constant.
        #[arg(long, default_value = "diminishing")]
        schedule: String,
        /// Schedule constant.
        #[arg(long, default_value_t = 1.0)]
        step_c: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, set, out, seed } => {
            let mut spec = ExperimentSpec::from_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            for assignment in &set {
                spec.apply_override(assignment)?;
            }
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let out_dir = resolve_out_dir(out.as_deref(), &spec.output_path);
            let summary = run_experiment(&spec, &out_dir)?;
            println!("{}", summary.describe());
            println!("outputs in {}", out_dir.display());
        }
        Command::Bench { d, n, density, steps, warmup, out, seed } => {
            let mut spec = ExperimentSpec {
                experiment: ExperimentKind::Bench,
                d,
                density,
                bench_steps: steps,
                bench_warmup: warmup,
                seed,
                ..ExperimentSpec::default()
            };
            spec.set_key("bench_ns", &n)?;
            let out_dir = resolve_out_dir(out.as_deref(), &spec.output_path);
            let summary = run_experiment(&spec, &out_dir)?;
            println!("{}", summary.describe());
            println!("outputs in {}", out_dir.display());
        }
        Command::Complete {
            entries,
            rows,
            cols,
            rank,
            passes,
            schedule,
            step_c,
            out,
            seed,
        } => {
            let list = read_entries(&entries)?;
            if list.is_empty() {
                anyhow::bail!("{}: no entries to complete", entries.display());
            }
            let rows = rows.unwrap_or_else(|| {
                list.iter().map(|&(r, _, _)| r).max().unwrap_or(0) + 1
            });
            let cols = cols.unwrap_or_else(|| {
                list.iter().map(|&(_, c, _)| c).max().unwrap_or(0) + 1
            });
            let spec = ExperimentSpec {
                schedule: match schedule.as_str() {
                    "diminishing" => ScheduleKind::Diminishing,
                    "constant" => ScheduleKind::Constant,
                    other => anyhow::bail!(
                        "unknown schedule `{other}` (expected diminishing or constant)"
                    ),
                },
                step_c,
                ..ExperimentSpec::default()
            };
            let problem = CompletionProblem::new(rows, cols, rank, passes, seed, list)?;
            let out_dir = resolve_out_dir(out.as_deref(), "out");
            let summary = complete_entries(&problem, &spec.tracker_config(), &out_dir)?;
            println!("{}", summary.describe());
            println!("outputs in {}", out_dir.display());
        }
    }
    Ok(())
}
