use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{Outcome, Status};
use config::{CommonArgs, RunConfig};

/// Monotonicity analysis of paired test scores.
#[derive(Debug, Parser)]
#[command(name = "locindex", version, about)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summary statistics and histogram counts per column
    Summarize {
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Fit conditional mean/median curves and write them as data files
    Fit {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// LOC index of every ordered column pair
    LocMatrix,
    /// Correlation, rank coefficients and LOC values of one pair
    Compare {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Rank plots, step functions and their rearrangements as data files
    PlotData {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

const EXIT_PARTIAL: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::resolve(&cli.common)?;
    log::debug!("{cfg:?}");
    match &cli.command {
        Command::Summarize { bins } => {
            if *bins == 0 {
                anyhow::bail!("--bins must be positive");
            }
            commands::summarize_cmd(&cfg, *bins)
        }
        Command::Fit { x, y, out_dir } => commands::fit_cmd(&cfg, x, y, out_dir),
        Command::LocMatrix => commands::loc_matrix_cmd(&cfg),
        Command::Compare { x, y } => commands::compare_cmd(&cfg, x, y),
        Command::PlotData { x, y, out_dir } => commands::plot_data_cmd(&cfg, x, y, out_dir),
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(outcome.text.as_bytes()).is_err() {
                return ExitCode::from(EXIT_INPUT);
            }
            match outcome.status {
                Status::Complete => ExitCode::SUCCESS,
                Status::Partial => ExitCode::from(EXIT_PARTIAL),
            }
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(EXIT_INPUT)
        }
    }
}
