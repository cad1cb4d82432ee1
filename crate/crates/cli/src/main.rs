use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qst_core::io::{read_pattern, write_density_matrix};
use qst_core::{ginibre_random_state, run_sweep, validate_pattern, ExperimentConfig, QstError};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qst",
    version,
    about = "Algebraic low-rank quantum state tomography"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random rank-R density matrix on N qubits as JSON.
    Gen {
        #[arg(long)]
        qubits: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a selection pattern and print the report as JSON.
    Validate {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        rank: usize,
    },
    /// Run the trials of a single method at a single d.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full methods x d x trials benchmark.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<QstError> for Failure {
    fn from(e: QstError) -> Self {
        match e.root() {
            QstError::Io(_) => Failure::Runtime(e.to_string()),
            QstError::Config(_)
            | QstError::Json(_)
            | QstError::InvalidRank { .. }
            | QstError::InvalidArgument(_)
            | QstError::InvalidPatternParameters(_)
            | QstError::Shape(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen {
            qubits,
            rank,
            seed,
            out,
        } => {
            if qubits == 0 || qubits > qst_core::experiment::MAX_QUBITS {
                return Err(Failure::Validation(format!(
                    "qubits must be in 1..={}",
                    qst_core::experiment::MAX_QUBITS
                )));
            }
            let rho = ginibre_random_state(1 << qubits, rank, seed)?;
            write_density_matrix(&out, &rho)?;
        }
        Command::Validate { pattern, rank } => {
            let p = read_pattern(&pattern)?;
            let report = validate_pattern(&p, rank);
            print_json(&report)?;
            if !report.all_ok() {
                return Err(Failure::Validation("pattern fails validation".into()));
            }
        }
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            if cfg.methods.len() != 1 || cfg.d_values.len() != 1 {
                return Err(Failure::Validation(
                    "run expects exactly one method and one d value; use sweep otherwise".into(),
                ));
            }
            let out = run_sweep(&cfg, None)?;
            print_json(&out.summary.rows)?;
        }
        Command::Sweep { config, jobs } => {
            let cfg = load_config(&config)?;
            let out = run_sweep(&cfg, jobs)?;
            print_json(&out.summary.rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
