//! Command-line front end.

pub mod commands;
pub mod config;
pub mod report;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

pub use commands::{cmd_convergence, cmd_energy, cmd_flow, cmd_verify, Outcome, EXIT_INPUT, EXIT_OK, EXIT_TOLERANCE};
pub use config::RunConfig;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "e3surf", version, about = "Surface geometry checks and Willmore flows in E(kappa, tau)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}


#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// TOML config, or JSON when the name ends in .json
    #[arg(long)]
    pub config: PathBuf,
    /// Write the JSON report here (overrides the config)
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the CSV table here (overrides the config)
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Use an N x N grid
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the selected identity and inequality checks
    Verify(CommonArgs),
    /// Willmore energy and Euler-Lagrange residual
    Energy(CommonArgs),
    /// Descent over the Hopf-torus family, or the nodal graph flow
    Flow(CommonArgs),
    /// Residual order of one check across grid sizes
    Convergence(CommonArgs),
}

fn execute(command: &Command) -> Result<Outcome> {
    let (args, run): (&CommonArgs, fn(&RunConfig) -> Result<Outcome>) = match command {
        Command::Verify(a) => (a, cmd_verify),
        Command::Energy(a) => (a, cmd_energy),
        Command::Flow(a) => (a, cmd_flow),
        Command::Convergence(a) => (a, cmd_convergence),
    };
    let mut cfg = RunConfig::load(&args.config)?.with_grid(args.grid);
    if args.grid.is_some() {
        cfg.validate()?;
    }
    if args.json.is_some() {
        cfg.output.json = args.json.clone();
    }
    if args.csv.is_some() {
        cfg.output.csv = args.csv.clone();
    }
    let out = run(&cfg)?;
    if let Some(p) = &cfg.output.json {
        std::fs::write(p, &out.json)?;
    }
    if let Some(p) = &cfg.output.csv {
        report::write_csv(p, &out.csv_header, &out.csv_rows)?;
    }
    Ok(out)
}

/// Exit code for a failed run: tolerance-type failures 1, input problems 2.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::StepCollapse { .. } => EXIT_TOLERANCE,
        _ => EXIT_INPUT,
    }
}

pub fn run(cli: &Cli) -> i32 {
    match execute(&cli.command) {
        Ok(out) => {
            print!("{}", out.text);
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
