use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtm_cli::{commands, CliError};

/// Multiple-try Metropolis runs, experiments and kernel checks.
#[derive(Debug, Parser)]
#[command(name = "mtm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for experiment runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct Io {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one chain and write its trace as CSV.
    Run {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        output: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a grid of experiment cells and write the summary as CSV.
    Experiment {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        output: PathBuf,
        /// Overrides master_seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build an exact kernel on a finite space and check its invariance.
    OracleCheck {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Seed of the optional Monte Carlo cross-check.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Posterior mean by grid integration.
    GridMean {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            let err = CliError::Config(format!("--threads: {e}"));
            eprintln!("error: {err}");
            return err.exit_code();
        }
    }
    let result = match &cli.command {
        Command::Run { io, output, seed } => commands::run(&io.config, output, *seed),
        Command::Experiment { io, output, seed } => commands::experiment(&io.config, output, *seed),
        Command::OracleCheck { io, output, seed } => commands::oracle_check(&io.config, output.as_ref(), *seed),
        Command::GridMean { io, output } => commands::grid_mean(&io.config, output.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
