//! `mhl` — runs weak Musielak–Orlicz martingale Hardy space experiments.
//!
//! Exit codes: 0 when every experiment's assertions pass, 1 when the run
//! completed but an assertion failed (the report is still written), 2 on
//! configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mhl_cli::{describe_config, describe_general, example_config, run_from_path, Config};

#[derive(Parser)]
#[command(name = "mhl", version, about = "Weak martingale Hardy space experiment driver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiments in a JSON config and write report.json + trials.csv.
    Run {
        /// Path to the config file (see `mhl schema` for an example).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json and trials.csv.
        #[arg(long, default_value = "mhl-out")]
        out: PathBuf,
        /// Seed override; beats MHL_SEED, which beats the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a config, or list available experiments without one.
    Describe {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print a complete example config to stdout.
    Schema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, out, seed } => match run_from_path(&config, &out, seed) {
            Ok(report) => {
                for e in &report.experiments {
                    println!(
                        "{}: {}",
                        e.name,
                        if e.pass { "pass" } else { "FAIL" }
                    );
                }
                println!(
                    "report written to {} (seed {}, overall {})",
                    out.display(),
                    report.seed,
                    if report.pass { "pass" } else { "FAIL" }
                );
                if report.pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
        Cmd::Describe { config } => match config {
            None => {
                print!("{}", describe_general());
                ExitCode::SUCCESS
            }
            Some(path) => {
                let text = match std::fs::read_to_string(&path) {
                    Ok(t) => t,
                    Err(e) => {
                        eprintln!("error: reading {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                };
                match serde_json::from_str::<Config>(&text) {
                    Ok(config) => {
                        print!("{}", describe_config(&config));
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: config does not match the schema: {e}");
                        ExitCode::from(2)
                    }
                }
            }
        },
        Cmd::Schema => {
            let example = example_config();
            println!(
                "{}",
                serde_json::to_string_pretty(&example).expect("example config serializes")
            );
            ExitCode::SUCCESS
        }
    }
}
