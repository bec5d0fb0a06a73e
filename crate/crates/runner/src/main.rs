//! `walker-lab`: run, resume, analyze, and replay walker co-evolution
//! experiments.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, bad
//! config files, runs that may not be pooled), 3 for I/O failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use runner::analyze::{analyze, AnalyzeError, Suite};
use runner::config::{Condition, ConfigError, ExperimentConfig};
use runner::experiment::{resume_experiment, run_experiment, RunError, RunSummary};
use runner::replay::{replay_to, ReplayError};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "walker-lab", version, about = "Walker co-evolution experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a run under one curriculum condition.
    Run {
        /// Curriculum condition to run.
        #[arg(long, value_enum)]
        condition: Condition,
        /// TOML config file; omitted keys use built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluation budget; overrides the config file.
        #[arg(long)]
        budget: Option<u64>,
        /// Evaluation worker threads; overrides the config file.
        #[arg(long)]
        workers: Option<usize>,
        /// Run output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Continue a checkpointed run in place.
    Resume {
        /// Path to a checkpoint file inside a run directory.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run an analysis suite over finished runs.
    Analyze {
        /// Run directories to pool; must share physics/operator config.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Which suite to run.
        #[arg(long, value_enum)]
        suite: Suite,
        /// Output directory for CSV/SVG files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay one episode as JSON lines on stdout.
    Replay {
        /// Serialized genotype file (e.g. a run's best.genotype).
        #[arg(long)]
        genotype: PathBuf,
        /// Environment as 8 comma-separated values.
        #[arg(long, value_parser = parse_env8)]
        env: Env8,
        /// Course seed.
        #[arg(long)]
        seed: u64,
    },
}

/// Newtype so clap can parse `--env a,b,c,d,e,f,g,h`.
#[derive(Clone)]
struct Env8([f64; 8]);

fn parse_env8(s: &str) -> Result<Env8, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 8 {
        return Err(format!("expected 8 comma-separated values, got {}", parts.len()));
    }
    let mut out = [0.0; 8];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad value {part:?}: {e}"))?;
    }
    Ok(Env8(out))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn dispatch(cli: Cli) -> Result<(), u8> {
    match cli.command {
        Command::Run {
            condition,
            config,
            seed,
            budget,
            workers,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_file(&path).map_err(report_config)?,
                None => ExperimentConfig::default(),
            };
            cfg.condition = condition;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            if let Some(budget) = budget {
                cfg.evaluation_budget = budget;
            }
            if let Some(workers) = workers {
                cfg.worker_count = workers;
            }
            cfg.out_dir = out;
            let summary = run_experiment(cfg).map_err(report_run)?;
            print_summary("run finished", &summary);
            Ok(())
        }
        Command::Resume { checkpoint } => {
            let summary = resume_experiment(&checkpoint).map_err(report_run)?;
            print_summary("resume finished", &summary);
            Ok(())
        }
        Command::Analyze { runs, suite, out } => {
            let written = analyze(&runs, suite, &out).map_err(report_analyze)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Replay { genotype, env, seed } => {
            let mut stdout = std::io::stdout().lock();
            replay_to(&mut stdout, &genotype, env.0, seed).map_err(report_replay)?;
            Ok(())
        }
    }
}

fn print_summary(what: &str, summary: &RunSummary) {
    println!(
        "{what}: condition={} generations={} evaluations={} best={} out={}",
        summary.condition,
        summary.generations,
        summary.evaluations,
        summary
            .best_fitness
            .map_or_else(|| "n/a".to_string(), |b| format!("{b:.2}")),
        summary.out_dir.display()
    );
}

fn report_config(e: ConfigError) -> u8 {
    eprintln!("error: {e}");
    match e {
        ConfigError::Read { .. } => EXIT_IO,
        ConfigError::Parse { .. } | ConfigError::Invalid(_) => EXIT_CONFIG,
    }
}

fn report_run(e: RunError) -> u8 {
    eprintln!("error: {e}");
    match e {
        RunError::Config(ConfigError::Read { .. }) => EXIT_IO,
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Io(_) | RunError::Checkpoint(_) | RunError::Pool(_) => EXIT_IO,
    }
}

fn report_analyze(e: AnalyzeError) -> u8 {
    eprintln!("error: {e}");
    match e {
        AnalyzeError::NoRuns | AnalyzeError::ConfigMismatch { .. } => EXIT_CONFIG,
        AnalyzeError::BadRun { .. } | AnalyzeError::Io(_) => EXIT_IO,
    }
}

fn report_replay(e: ReplayError) -> u8 {
    eprintln!("error: {e}");
    match e {
        ReplayError::Genotype(_) | ReplayError::Env(_) => EXIT_CONFIG,
        ReplayError::Read { .. } | ReplayError::Io(_) => EXIT_IO,
    }
}
