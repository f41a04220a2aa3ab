use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use elliptica_cli::{catalog, run_config, CliError};

#[derive(Parser)]
#[command(name = "elliptica", version, about = "Run elliptic PDE experiments and write reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for stochastic experiments (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List experiments with their parameters and defaults.
    List {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn list(json: bool) {
    let cat = catalog::catalog();
    if json {
        println!("{}", serde_json::to_string_pretty(&cat).expect("catalog serializes"));
        return;
    }
    for e in cat {
        println!("{}  {}", e.id, e.summary);
        println!("    reference: {}", e.reference);
        for p in e.params {
            println!("    {} = {}  ({})", p.name, p.default, p.help);
        }
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(&config).map_err(|source| CliError::Io { path: config.clone(), source })?;
    let summary = run_config(&text, out.as_deref(), seed)?;
    println!("{}: report written to {}", summary.experiment, summary.report.display());
    if summary.passed {
        println!("all assertions passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed assertions: {}", summary.failed.join(", "));
        Ok(ExitCode::from(2))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            list(json);
            ExitCode::SUCCESS
        }
        Command::Run { config, out, seed } => run(config, out, seed).unwrap_or_else(|e| {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }),
    }
}
