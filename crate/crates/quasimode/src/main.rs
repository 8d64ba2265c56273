// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line entry point: run scenario configs, parameter sweeps, and
//! self-consistency checks, and reproduce the built-in benchmark curve.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quasimode::runner::{run, sweep, validate_scenario};
use quasimode::scenario::{from_config_string, Scenario};
use quasimode::{Error, Result};

/// Exit code for a validation report with failing checks.
const VALIDATION_FAILURE_EXIT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "quasimode",
    version,
    about = "Decoherence of a charge qubit in a lossy cavity: calibrated \
             bath discretization, exact mode-matrix propagation, and \
             closed-form overlap curves",
    after_help = "Exit codes: 0 success, 2 config error, 3 guard violation, \
                  4 validation failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and write its CSV artifacts.
    Simulate {
        /// Path to a flat `key = value` config file with [section] headers.
        config: PathBuf,
    },
    /// Run one simulation per value of a swept numeric key and write a
    /// summary CSV of (value, fitted rate, plateau).
    Sweep {
        /// Path to the base config file.
        config: PathBuf,
        /// Swept key and values, e.g. --vary initial.alpha=1,2,3
        #[arg(long, value_name = "KEY=V1,V2,...")]
        vary: String,
    },
    /// Run the self-consistency checks (unitarity, calibration,
    /// displacement cancellation, route agreement) on a reduced grid.
    Validate {
        /// Path to the config file to check.
        config: PathBuf,
    },
    /// Run the built-in oscillating-decay benchmark (coherent α = 2,
    /// closed-form route) and write its decoherence curve.
    Fig2 {
        /// Output CSV path (default: fig2.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_config_string(&text)
}

fn parse_vary(raw: &str) -> Result<(String, Vec<f64>)> {
    let (key, list) = raw.split_once('=').ok_or_else(|| {
        Error::InvalidConfig(format!(
            "--vary expects KEY=V1,V2,..., got '{raw}'"
        ))
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::InvalidConfig(
            "--vary is missing the key before '='".into(),
        ));
    }
    let values = list
        .split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>().map_err(|_| {
                Error::InvalidConfig(format!("sweep value '{v}' is not a number"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((key.to_string(), values))
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate { config } => {
            let sc = load_scenario(&config)?;
            let out = run(&sc)?;
            print_warnings(&out.warnings);
            for path in &out.written {
                println!("wrote {}", path.display());
            }
            println!(
                "gamma_effective = {:.6e} rad/s over {} bath modes",
                out.gamma_effective,
                out.bath.len()
            );
            Ok(0)
        }
        Command::Sweep { config, vary } => {
            let sc = load_scenario(&config)?;
            let (key, values) = parse_vary(&vary)?;
            let out = sweep(&sc, &key, &values)?;
            for run_out in &out.runs {
                print_warnings(&run_out.warnings);
                for path in &run_out.written {
                    println!("wrote {}", path.display());
                }
            }
            println!("wrote {}", out.summary_path.display());
            for row in &out.rows {
                println!(
                    "{key} = {}: fitted_rate = {:.6e} rad/s, plateau = {:.6e}",
                    row.value, row.fitted_rate, row.plateau
                );
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let sc = load_scenario(&config)?;
            let report = validate_scenario(&sc)?;
            print_warnings(&report.warnings);
            for check in &report.checks {
                println!(
                    "check {}: {:.6e} <= {:.1e} .. {}",
                    check.name,
                    check.value,
                    check.bound,
                    if check.pass { "PASS" } else { "FAIL" }
                );
            }
            if report.all_pass() {
                println!("validation: PASS");
                Ok(0)
            } else {
                eprintln!("validation: FAIL");
                Ok(VALIDATION_FAILURE_EXIT)
            }
        }
        Command::Fig2 { out } => {
            let mut sc = Scenario::builtin_fig2();
            if let Some(path) = out {
                sc.output_path = path;
            }
            let result = run(&sc)?;
            print_warnings(&result.warnings);
            for path in &result.written {
                println!("wrote {}", path.display());
            }
            let d = result
                .result
                .decoherence_closed
                .as_ref()
                .expect("the benchmark scenario runs the closed-form route");
            let tail = &d[d.len() - d.len() / 10..];
            let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
            println!("plateau = {plateau:.6e} (expected near exp(-4) = 1.831564e-2)");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
