use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpv_cli::{commands, CliError, Outcome, RunConfig};

#[derive(Parser)]
#[command(name = "dpv", version, about = "Derived personal valuations from randomized experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic experiment CSV plus a ground-truth sidecar.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search representations and write the eligible-subpopulation model.
    Discover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score instances with a model, writing `id,dpv` rows.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discover on the training split and report DPV quartiles on the rest.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let load = |c: &Common| RunConfig::load(c.config.as_deref(), c.seed);
    match cli.command {
        Command::Simulate { common, out } => commands::simulate(&load(&common)?, &out),
        Command::Discover { common, input, out } => commands::discover(&load(&common)?, &input, &out),
        Command::Score {
            common,
            input,
            model,
            out,
        } => commands::score(&load(&common)?, &input, &model, &out),
        Command::Validate { common, input, out } => commands::validate(&load(&common)?, &input, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            if outcome.code == 3 {
                eprintln!("no eligible subpopulations found");
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
