use std::path::PathBuf;
use std::process::ExitCode;

use avgtrack_cli::{
    cmd_gains, cmd_run, cmd_scenario, load_scenario, CliError, RunOverrides, VERSION,
};
use clap::{Parser, Subcommand};

/// Distributed average tracking simulator.
#[derive(Parser)]
#[command(name = "avgtrack", version = VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gain design and print P, K, Gamma, lambda2, c1, c2 and gamma.
    Gains {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate one or more scenarios and write CSV/JSON results.
    Run {
        /// Scenario file; repeat to run several in parallel.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Seed for randomized initial states (only used with "random_initial").
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a bundled scenario as JSON.
    Scenario { name: String },
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Gains { config } => cmd_gains(&load_scenario(&config)?),
        Command::Run {
            config,
            out,
            dt,
            t_end,
            seed,
        } => cmd_run(&config, &out, RunOverrides { dt, t_end, seed })
            .map(|lines| lines.join("\n") + "\n"),
        Command::Scenario { name } => cmd_scenario(&name).map(|s| s + "\n"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
