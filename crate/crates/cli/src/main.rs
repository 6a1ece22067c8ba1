//! Command-line front end. Loads a scenario by built-in name or JSON
//! path, applies key=value overrides, runs one of the canned studies,
//! and emits the report as CSV or JSON.
//!
//! Exit codes: 0 success, 2 scenario problem, 3 session fault,
//! 4 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sswpt_core::{
    self_check, compare_methods, default_delta_grid, default_fs_grid, default_k_list, emit_report,
    identification_error_sweep, run_case, sweep_detuning, DisturbanceSelection, Error, Mode,
    ReportFormat, Scenario, SweepReport,
};

#[derive(Parser)]
#[command(
    name = "sswpt",
    version,
    about = "Series-series wireless power link: drift studies, resonance identification, retuning sessions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Built-in scenario name, or path to a scenario JSON file.
    #[arg(long, default_value = "table1")]
    scenario: String,

    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, default_value = "csv")]
    format: String,

    /// Scenario override, dotted key (repeatable), e.g. tank.delta=0.1
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Efficiency and power factor at the carrier as the secondary drifts.
    SweepDetuning {
        #[command(flatten)]
        common: Common,
    },
    /// Compare primary-only, secondary-only, and double-side tuning.
    CompareMethods {
        #[command(flatten)]
        common: Common,
    },
    /// Identification error across the true secondary resonance.
    IdentifySweep {
        #[command(flatten)]
        common: Common,
        /// First probe pair, Hz, as "fm,fn".
        #[arg(long, value_name = "FM,FN")]
        band: Option<String>,
        /// Restrict to one disturbance column group.
        #[arg(long, value_name = "none|load|scc|zcd|all")]
        disturb: Option<String>,
    },
    /// Run the full identification-and-retune session on a scenario.
    RunCase {
        #[command(flatten)]
        common: Common,
    },
    /// Calibrate the control angle across the band with the secondary open.
    SelfCheck {
        #[command(flatten)]
        common: Common,
    },
}

fn load_scenario(common: &Common) -> Result<Scenario, Error> {
    let mut scenario = match Scenario::builtin(&common.scenario) {
        Some(s) => s,
        None => {
            let text = std::fs::read_to_string(&common.scenario).map_err(|source| {
                Error::Scenario(format!(
                    "{:?} is not a built-in scenario ({}) and reading it as a file failed: {source}",
                    common.scenario,
                    Scenario::builtin_names().join(", ")
                ))
            })?;
            Scenario::from_json_str(&text)?
        }
    };
    for item in &common.overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            Error::Scenario(format!("override {item:?} is not of the form key=value"))
        })?;
        scenario.apply_override(key, value)?;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn parse_format(common: &Common) -> Result<ReportFormat, Error> {
    common.format.parse()
}

fn emit(report: &SweepReport, common: &Common) -> Result<(), Error> {
    emit_report(report, common.out.as_deref(), parse_format(common)?)
}

fn parse_band(band: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Scenario(format!("band {band:?} is not of the form fm,fn in Hz"));
    let (a, b) = band.split_once(',').ok_or_else(bad)?;
    let fm: f64 = a.trim().parse().map_err(|_| bad())?;
    let fn_: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((fm, fn_))
}

fn delta_grid(scenario: &Scenario) -> Vec<f64> {
    match &scenario.sweep {
        Some(d) if d.variable == "delta" => d.values(),
        _ => default_delta_grid(),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::SweepDetuning { common } => {
            let scenario = load_scenario(&common)?;
            let k_list = match &scenario.sweep {
                Some(d) if d.variable == "k" => d.values(),
                _ => default_k_list(),
            };
            let report = sweep_detuning(&scenario, &k_list, &delta_grid(&scenario))?;
            emit(&report, &common)?;
            Ok(0)
        }
        Command::CompareMethods { common } => {
            let scenario = load_scenario(&common)?;
            let report = compare_methods(&scenario, &delta_grid(&scenario))?;
            emit(&report, &common)?;
            Ok(0)
        }
        Command::IdentifySweep { common, band, disturb } => {
            let scenario = load_scenario(&common)?;
            let first_pair = match band {
                Some(b) => parse_band(&b)?,
                None => (84e3, 86e3),
            };
            let fs_grid = match &scenario.sweep {
                Some(d) if d.variable == "fs" => d.values(),
                _ => default_fs_grid(),
            };
            let selections: Vec<DisturbanceSelection> = match disturb {
                Some(s) => vec![s.parse()?],
                None => DisturbanceSelection::all_columns().to_vec(),
            };
            let report =
                identification_error_sweep(&scenario, &fs_grid, first_pair, &selections)?;
            emit(&report, &common)?;
            Ok(0)
        }
        Command::RunCase { common } => {
            let scenario = load_scenario(&common)?;
            let case = run_case(&scenario)?;
            let report = case.to_report(&scenario);
            emit(&report, &common)?;
            if case.final_mode == Mode::Fault {
                eprintln!(
                    "session fault: {}",
                    case.note.as_deref().unwrap_or("unspecified")
                );
                return Ok(3);
            }
            Ok(0)
        }
        Command::SelfCheck { common } => {
            let scenario = load_scenario(&common)?;
            let tank = scenario.resolved_tank();
            let table = self_check(tank.lp, tank.rp, &scenario.scc, &scenario.controller)?;
            let text = table.to_text();
            match &common.out {
                Some(path) => std::fs::write(path, &text).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Scenario(_) | Error::Domain(_) => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
