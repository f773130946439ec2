// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shfsim::dynamics::PulseModel;
use shfsim::runner::{cmd_check, cmd_levels, cmd_run, cmd_sweep, render_table, sweep_csv};
use shfsim::scenario::{load_scenario, Scenario};
use shfsim::Error;

#[derive(Parser, Debug)]
#[command(name = "shfsim", version, about = "Electron-nuclear spin qubit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Structured)]
    format: Format,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pulse_model: Option<ModelArg>,

    /// Fail (exit 1) when the headline fidelity is below this value.
    #[arg(long, global = true)]
    fail_below: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact and first-order level tables plus classified transitions.
    Levels,
    /// Run the scenario's protocol.
    Run,
    /// Run the scenario once per value of one numeric field.
    Sweep {
        /// Dot path, e.g. `system.sites.0.hyperfine.a_s`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
    /// Regime and operation-budget report.
    Check,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Structured,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Ideal,
    Rabi,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn resolve(cli: &Cli) -> Result<Scenario, Failure> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| Failure::Config("--scenario is required".into()))?;
    let mut s = load_scenario(path)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(m) = cli.pulse_model {
        s.pulse_model = match m {
            ModelArg::Ideal => PulseModel::Ideal,
            ModelArg::Rabi => PulseModel::RabiNumeric,
        };
    }
    if let Some(t) = cli.fail_below {
        match s.protocol.as_mut() {
            Some(p) => p.fail_below = Some(t),
            None => return Err(Failure::Config("--fail-below needs a [protocol] table".into())),
        }
    }
    s.validate()?;
    Ok(s)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let scenario = resolve(cli)?;
    match &cli.command {
        Command::Levels | Command::Run | Command::Check => {
            let bundle = match cli.command {
                Command::Levels => cmd_levels(&scenario)?,
                Command::Run => cmd_run(&scenario)?,
                _ => cmd_check(&scenario)?,
            };
            let text = match cli.format {
                Format::Structured => json(&bundle)?,
                Format::Table => render_table(&bundle),
            };
            emit(cli, &text)?;
            if !bundle.passed() {
                return Err(Failure::Runtime("fidelity below the requested floor".into()));
            }
            Ok(())
        }
        Command::Sweep { param, values } => {
            let (path, values) = match (param, values, &scenario.sweep) {
                (Some(p), Some(v), _) => (p.clone(), v.clone()),
                (None, None, Some(sw)) => (sw.path.clone(), sw.values.clone()),
                (Some(p), None, Some(sw)) => (p.clone(), sw.values.clone()),
                (None, Some(v), Some(sw)) => (sw.path.clone(), v.clone()),
                _ => return Err(Failure::Config("sweep needs --param and --values or a [sweep] table".into())),
            };
            let sweep = cmd_sweep(&scenario, &path, &values)?;
            let text = match cli.format {
                Format::Structured => json(&sweep)?,
                Format::Table => sweep_csv(&sweep)?,
            };
            emit(cli, &text)?;
            if sweep.points.iter().any(|p| !p.bundle.passed()) {
                return Err(Failure::Runtime("fidelity below the requested floor".into()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
