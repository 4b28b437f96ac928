//! `fplap`: evaluate, solve, verify, scan and report.
//!
//! Exit codes: 0 ok, 2 bad input, 3 violated precondition, 4 no
//! convergence, 5 verification violations.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(name = "fplap", version, about = "Fractional p-Laplacian toolkit")]
struct Cli {
    /// Output directory (default `fplap-out`, or $FRACPLAP_OUTPUT_DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores, or $FRACPLAP_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the operator on a grid function; JSON lines on stdout.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve a Dirichlet, ball power or whole-space problem.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named verification suite.
    Verify {
        #[arg(long, conflicts_with = "suite")]
        config: Option<PathBuf>,
        /// Suite name, run with default settings.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Moving-plane scan of a grid function.
    Scan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Symmetry report of a grid function.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fplap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let workers = match cli.workers {
        Some(w) => Some(w),
        None => match std::env::var("FRACPLAP_WORKERS") {
            Ok(v) => Some(v.parse().map_err(|_| CliError::Usage(format!("FRACPLAP_WORKERS must be a positive integer, got '{v}'")))?),
            Err(_) => None,
        },
    };
    if workers == Some(0) {
        return Err(CliError::Usage("worker count must be positive".into()));
    }
    let out = cli
        .out
        .or_else(|| std::env::var_os("FRACPLAP_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fplap-out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Eval { config } => commands::eval(&config),
        Command::Solve { config } => commands::solve(&config, &out),
        Command::Verify { config, suite } => commands::verify(config.as_deref(), suite.as_deref(), &out),
        Command::Scan { config } => commands::scan(&config, &out),
        Command::Report { config } => commands::report(&config, &out),
    })
}
