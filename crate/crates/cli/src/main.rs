use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gravchan_cli::{read_config, resolve_out_dir, run, run_sweep, CliError, RunOptions};

#[derive(Parser)]
#[command(
    name = "gravchan",
    version,
    about = "Run gravchan experiments from a JSON configuration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        config: PathBuf,
        /// Evaluate the experiment's embedded assertions; exit 4 on failure.
        #[arg(long)]
        check: bool,
        /// Output directory (overrides GRAVCHAN_OUT_DIR and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ensemble seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one experiment per grid point of a scalar parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path to a number in the config, e.g. `physical.d` or `model.epsilon`.
        #[arg(long)]
        param: String,
        /// `start:stop:n`, `log:start:stop:n` or `a,b,c`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            check,
            out,
            seed,
        } => {
            let value = read_config(&config)?;
            let dir = resolve_out_dir(out.as_deref(), &value);
            let outcome = run(&value, &RunOptions { check, seed }, &dir)?;
            for path in &outcome.written {
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            grid,
            check,
            out,
            seed,
        } => {
            let value = read_config(&config)?;
            let dir = resolve_out_dir(out.as_deref(), &value);
            let outcomes = run_sweep(&value, &param, &grid, &RunOptions { check, seed }, &dir)?;
            log::info!("{} points written under {}", outcomes.len(), dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
