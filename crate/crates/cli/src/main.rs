// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpw_cli::commands::{self, Command};
use qpw_cli::config::{Overrides, RunConfig};
use qpw_cli::error::{CliError, EXIT_NUMERIC};
use qpw_cli::pool::{build_pool, Rayon};

/// Two-qutrit parametric gate workbench.
#[derive(Debug, Parser)]
#[command(name = "qpw", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = number of cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// RNG seed, overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Propagation step in ps, overrides `numerics.dt_ps`.
    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Bare and dressed spectrum plus the transition table.
    Spectrum,
    /// Coupling and flux derivative over a flux sweep.
    Couplings,
    /// Simulate one pulse and extract the two-qutrit gate.
    SimulateGate,
    /// Calibrate the pulse duration for an iSWAP angle.
    Calibrate,
    /// Compile a target into the layered ansatz.
    Compile,
    /// Check the tabulated CZ decomposition, optionally composed from simulated gates.
    VerifyCz,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Couplings => Command::Couplings,
            Cmd::SimulateGate => Command::SimulateGate,
            Cmd::Calibrate => Command::Calibrate,
            Cmd::Compile => Command::Compile,
            Cmd::VerifyCz => Command::VerifyCz,
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let over = Overrides { out: args.out.clone(), seed: args.seed, dt_ps: args.dt };
    let cfg = RunConfig::load(args.config.as_deref(), &over)?;
    let pool = build_pool(args.jobs).map_err(|e| CliError::Output(e.to_string()))?;
    let outcome = pool.install(|| commands::run(args.command.into(), &cfg, &Rayon))?;
    println!("{}", outcome.summary);
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QPW_LOG", "warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // clap reports usage errors as 2, which matches the config code
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qpw {}: {e}", Command::from(args.command).name());
            let code = e.exit_code();
            ExitCode::from(u8::try_from(code).unwrap_or(EXIT_NUMERIC as u8))
        }
    }
}
