use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mapless_core::cli::{cmd_acceptance, cmd_run, cmd_sweep, Overrides};

#[derive(Parser)]
#[command(name = "mapless", version, about = "Map-less lane keeping simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report bundle.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["fast", "full"])]
        mode: Option<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a scenario once per value of a configuration key.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// KEY=V1,V2,... where KEY is dotted, e.g. controller.lookahead
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["fast", "full"])]
        mode: Option<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the acceptance suite.
    Acceptance {
        /// TOML file overriding individual tolerances.
        #[arg(long)]
        tolerances: Option<PathBuf>,
        /// Comma-separated criterion ids, e.g. AC5,AC7.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            mode,
            quiet,
        } => cmd_run(&scenario, &out, &Overrides { seed, mode }, quiet),
        Command::Sweep {
            scenario,
            out,
            sweep,
            seed,
            mode,
            quiet,
        } => cmd_sweep(&scenario, &out, &sweep, &Overrides { seed, mode }, quiet),
        Command::Acceptance { tolerances, only } => cmd_acceptance(tolerances.as_deref(), &only),
    };
    ExitCode::from(code as u8)
}
