use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use s2qn::experiment::{run_experiment, write_artifacts, ExperimentError, RunConfig};
use s2qn::parallel::init_thread_pool;
use s2qn::validation::{run_suites, Fault};
use thiserror::Error;

mod compare;
mod svg;

#[derive(Parser)]
#[command(name = "s2qn", version, about = "Structured stochastic quasi-Newton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `optimizer.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the fast solvers and derivatives against reference computations.
    Validate {
        /// Only suites whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Align completed runs on a common epoch grid.
    Compare {
        /// Run directories, or config files whose `output_dir` holds a completed run.
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Aligned CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{} has no output directory; pass --out or set output_dir", .0.display())]
    NoOutput(PathBuf),
    #[error("{0}")]
    Mismatch(String),
    #[error("{path}: {msg}")]
    Artifact { path: PathBuf, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} of {1} suites failed")]
    Validation(usize, usize),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Experiment(e) => e.code(),
            CliError::NoOutput(_) => "config",
            CliError::Mismatch(_) => "mismatch",
            CliError::Artifact { .. } => "artifact",
            CliError::Io(_) => "io",
            CliError::Validation(..) => "validation",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Experiment(e) if e.is_config() => 2,
            CliError::Experiment(_) => 3,
            CliError::NoOutput(_) | CliError::Mismatch(_) | CliError::Artifact { .. } => 2,
            CliError::Io(_) => 3,
            CliError::Validation(..) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("S2QN_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        init_thread_pool(n);
    }
    let result = match cli.command {
        Command::Train { config, seed, out } => train(&config, seed, out),
        Command::Validate { filter } => validate(filter.as_deref()),
        Command::Compare { runs, out, plot } => compare::compare(&runs, out.as_deref(), plot.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error code={} {msg}", e.code());
            ExitCode::from(e.exit_code())
        }
    }
}

fn train(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = RunConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg.optimizer.seed = s;
    }
    if out.is_some() {
        cfg.output_dir = out;
    }
    let dir = cfg.output_dir.clone().ok_or_else(|| CliError::NoOutput(config.to_path_buf()))?;
    let exp = run_experiment(&cfg)?;
    write_artifacts(&dir, &exp)?;
    let s = &exp.summary;
    println!(
        "{} {} seed={} iters={} epochs={:.3} loss={:e} gnorm={:e} relerr={} stop={:?} -> {}",
        s.problem,
        s.method,
        s.seed,
        s.iterations,
        s.epochs,
        s.final_loss,
        s.final_gnorm,
        s.final_relerr.map_or("-".into(), |r| format!("{r:e}")),
        s.stop,
        dir.display()
    );
    Ok(())
}

fn validate(filter: Option<&str>) -> Result<(), CliError> {
    let results = run_suites(filter, &Fault::from_env());
    println!("{:<14} {:>6} {:>12} {:>10}  result", "suite", "cases", "worst", "tol");
    for r in &results {
        println!(
            "{:<14} {:>6} {:>12.3e} {:>10.1e}  {}",
            r.name,
            r.cases,
            r.worst,
            r.tol,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 || results.is_empty() {
        return Err(CliError::Validation(failed, results.len()));
    }
    Ok(())
}
