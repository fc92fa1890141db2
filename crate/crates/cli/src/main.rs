//! `bellfake`: run faked-CHSH experiments, sweep model parameters and check
//! control-pulse feasibility from TOML config files.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{SweepSpec, SweepVar};
use crate::config::Overrides;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bellfake", version, about = "Simulate CHSH tests faked by detector control")]
struct Cli {
    /// Override `engine.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `engine.trials`.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and print its statistics.
    Run {
        config: PathBuf,
        /// Summary CSV path; overrides `output.summary_csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one model parameter and write analytic and simulated curves.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        var: VarArg,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        /// Include Monte Carlo columns (default).
        #[arg(long, overrides_with = "no_mc")]
        mc: bool,
        /// Analytic columns only.
        #[arg(long = "no-mc", overrides_with = "mc")]
        no_mc: bool,
    },
    /// Print the control-pulse intensity window of every row.
    CheckFeasibility { config: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VarArg {
    P2,
    Eta,
    Etarget,
}

impl From<VarArg> for SweepVar {
    fn from(v: VarArg) -> Self {
        match v {
            VarArg::P2 => SweepVar::P2,
            VarArg::Eta => SweepVar::Eta,
            VarArg::Etarget => SweepVar::ETarget,
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
    };
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Run { config, out } => {
            let loaded = config::load(&config)?;
            commands::run(&loaded, overrides, out.as_deref(), &mut stdout)
        }
        Command::Sweep {
            config,
            var,
            from,
            to,
            steps,
            out,
            no_mc,
            ..
        } => {
            let spec = SweepSpec::new(var.into(), from, to, steps)?;
            let loaded = config::load(&config)?;
            commands::sweep(&loaded, overrides, spec, !no_mc, &out, &mut stdout)
        }
        Command::CheckFeasibility { config } => {
            let loaded = config::load(&config)?;
            commands::check_feasibility(&loaded, &mut stdout)
        }
    }?;
    stdout.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                CliError::Validation(_) => "validation error",
                CliError::Runtime(_) => "error",
            };
            eprintln!("bellfake: {kind}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
