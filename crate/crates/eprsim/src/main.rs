use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eprsim::experiment::{compare, run, ExperimentConfig};
use eprsim::{Error, Model};

#[derive(Parser)]
#[command(name = "eprsim", version, about = "Seeded EPR-B correlation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and print its JSON summary.
    Run(RunArgs),
    /// Join a result table against an analytic reference curve.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured emission model.
    #[arg(long)]
    model: Option<Model>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured event count.
    #[arg(long)]
    n_events: Option<u64>,
    /// Override the coincidence window in seconds.
    #[arg(long)]
    window: Option<f64>,
    /// Output prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Result table CSV produced by `eprsim run`.
    #[arg(long)]
    input: PathBuf,
    /// Analytic reference model to join against.
    #[arg(long)]
    oracle: Model,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
            });
            eprintln!("{record}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let mut config = ExperimentConfig::load(&args.config)?;
            apply_env_seed(&mut config)?;
            // Flags beat both the file and the environment.
            if let Some(model) = args.model {
                config.model = model;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(n_events) = args.n_events {
                config.n_events = n_events;
            }
            if let Some(window) = args.window {
                config.window = Some(window);
            }
            if let Some(out) = args.out {
                config.output = Some(out);
            }
            let output = run(&config)?;
            println!("{:#}", output.summary);
            Ok(())
        }
        Command::Compare(args) => {
            let report = compare(&args.input, args.oracle)?;
            let value = serde_json::to_value(report)
                .map_err(|e| Error::input(format!("cannot serialize report: {e}")))?;
            println!("{value:#}");
            Ok(())
        }
    }
}

/// Seed precedence is flag > EPRSIM_SEED > config file, so the environment
/// is applied first and a `--seed` flag may still overwrite it.
fn apply_env_seed(config: &mut ExperimentConfig) -> Result<(), Error> {
    match std::env::var("EPRSIM_SEED") {
        Ok(raw) => {
            let seed = raw.trim().parse::<u64>().map_err(|_| {
                Error::config(format!("EPRSIM_SEED must be an unsigned integer, got {raw:?}"))
            })?;
            config.seed = seed;
            Ok(())
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(Error::config("EPRSIM_SEED is not valid unicode".to_string()))
        }
    }
}
