use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sgrobust_cli::{compare, run, validate, RunError, RunOptions};

/// Speed-gradient adaptive control experiments: run scenarios and sweeps,
/// check them against closed-form bounds, compare summaries.
#[derive(Debug, Parser)]
#[command(name = "sgrobust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every point of a manifest and write trajectories, reports and a summary.
    Run {
        manifest: PathBuf,
        /// Output directory (default: the manifest's `out`, else `out/` next to it).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Fraction of the horizon used by the tail-supremum estimator.
        #[arg(long = "tail-fraction")]
        tail_fraction: Option<f64>,
        /// Treat certificate warnings as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Join summaries on their sweep axes and print measured-versus-bound margins.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Parse and check a scenario file and print its closed-form constants.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            manifest,
            out,
            jobs,
            tail_fraction,
            strict,
        } => {
            let opts = RunOptions {
                out,
                jobs,
                tail_fraction,
                strict,
            };
            match run(&manifest, &opts) {
                Ok(outcome) => {
                    for p in &outcome.points {
                        let detail = p.error.as_deref().unwrap_or("");
                        println!("{} {} {}", p.point.id(), p.status.as_str(), detail);
                    }
                    println!("artifacts in {}", outcome.out_dir.display());
                    if outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("some certificates failed; see the reports");
                        ExitCode::from(1)
                    }
                }
                Err(e @ RunError::Invalid(_)) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::Compare { summaries } => match compare(&summaries) {
            Ok(table) => {
                print!("{table}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Validate { scenario } => match validate(&scenario) {
            Ok(summary) => {
                for l in &summary.lines {
                    println!("{l}");
                }
                ExitCode::SUCCESS
            }
            Err(d) => {
                eprintln!("{d}");
                ExitCode::from(2)
            }
        },
    }
}
