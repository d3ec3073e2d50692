mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

/// Robust martingale optimal transport bounds on finite grids.
///
/// Exit codes: 0 success, 1 solver or io failure, 2 infeasible instance,
/// 3 config error.
#[derive(Debug, Parser)]
#[command(name = "drmot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and print the value and residuals as JSON.
    Solve {
        config: PathBuf,
        /// Write the worst-case measure as CSV.
        #[arg(long)]
        primal: Option<PathBuf>,
    },
    /// Exact martingale transport value of the configured marginals.
    Mot { config: PathBuf },
    /// W1 distance between two one-dimensional measures.
    Wasserstein { a: PathBuf, b: PathBuf },
    /// Check that consecutive measures increase in convex order.
    ConvexOrder {
        #[arg(required = true, num_args = 2..)]
        measures: Vec<PathBuf>,
    },
    /// Project a martingale measure onto a grid.
    ProjectGrid {
        joint: PathBuf,
        #[arg(long)]
        resolution: usize,
        /// Grid interval `lo,hi`, one per coordinate.
        #[arg(long = "interval", value_parser = parse_interval, required = true)]
        intervals: Vec<[f64; 2]>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Value gaps against a large-sample reference over sample sizes and seeds.
    ConvergeN {
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Values along a ladder of grid resolutions.
    ConvergeGrid {
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Values along a ladder of truncation levels for unbounded families.
    Truncate {
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn parse_interval(s: &str) -> Result<[f64; 2], String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok([p(lo)?, p(hi)?])
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, primal } => commands::solve(&config, primal.as_deref()),
        Command::Mot { config } => commands::mot(&config),
        Command::Wasserstein { a, b } => commands::wasserstein(&a, &b),
        Command::ConvexOrder { measures } => commands::convex_order(&measures),
        Command::ProjectGrid { joint, resolution, intervals, output } => {
            commands::project_grid(&joint, resolution, &intervals, output.as_deref())
        }
        Command::ConvergeN { config, output } => commands::converge_n(&config, output.as_deref()),
        Command::ConvergeGrid { config, output } => commands::converge_grid(&config, output.as_deref()),
        Command::Truncate { config, output } => commands::truncate(&config, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
