//! Command-line driver: runs a single simulation or a convergence study
//! described by a configuration file and writes CSV tables and VTK
//! snapshots to the output directory.
//!
//! Exit status: 0 on success; 1 for configuration errors, an unwritable
//! output directory included; 2 when a solve fails (partial results are
//! still written); 3 when `--assert-orders` finds an observed order outside
//! the requested interval.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemofluid::config::{parse_config, Mode, RunConfig};
use chemofluid::output::{self, OutputError};
use chemofluid::study::{
    run_convergence_study, run_simulation, ErrorReport, SimulationSetup, StudyError, Trajectory,
};

const CONFIG_ERROR: u8 = 1;
const SOLVER_FAILURE: u8 = 2;
const ORDER_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(version, about = "Chemotaxis-fluid competition solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// March one configuration to its final time.
    Simulate {
        /// Configuration file.
        config: PathBuf,
    },
    /// Run a space or time convergence study against the manufactured solution.
    Convergence {
        /// Configuration file.
        config: PathBuf,
        /// Fail with status 3 unless every observed order lies in [LO, HI].
        #[arg(long, value_name = "LO,HI", value_parser = parse_interval, allow_hyphen_values = true)]
        assert_orders: Option<(f64, f64)>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Output directory, replacing `[output] dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Linear solver tolerance, replacing `[solver] tol`.
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Snapshot times, replacing `[output] snapshots`.
    #[arg(long, global = true, value_name = "T1,T2,...", value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("`{lo}` is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("`{hi}` is not a number"))?;
    if !(lo <= hi) {
        return Err(format!("empty interval [{lo}, {hi}]"));
    }
    Ok((lo, hi))
}

/// Applies command-line overrides and rechecks the constraints they touch.
fn apply(overrides: &Overrides, config: &mut RunConfig) -> Result<(), String> {
    if let Some(dir) = &overrides.out {
        config.output_dir = dir.clone();
    }
    if let Some(tol) = overrides.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(format!("--tol {tol}: tolerance must lie in (0, 1)"));
        }
        config.tol = tol;
    }
    if let Some(times) = &overrides.snapshots {
        if let Some(bad) = times.iter().find(|&&t| !(0.0..=config.final_time).contains(&t)) {
            return Err(format!("--snapshots: time {bad} outside [0, {}]", config.final_time));
        }
        config.snapshots = times.clone();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, assert_orders) = match &cli.command {
        Command::Simulate { config } => (config, None),
        Command::Convergence { config, assert_orders } => (config, *assert_orders),
    };
    let mut config = match parse_config(path) {
        Ok(c) => c,
        Err(e) => return fail(CONFIG_ERROR, &format!("{}: {e}", path.display())),
    };
    if let Err(e) = apply(&cli.overrides, &mut config) {
        return fail(CONFIG_ERROR, &e);
    }
    let simulate = matches!(cli.command, Command::Simulate { .. });
    if simulate != (config.mode == Mode::Simulate) {
        let wanted = if simulate { "simulate" } else { "convergence-space or convergence-time" };
        return fail(CONFIG_ERROR, &format!("{}: mode = {} but this command needs {wanted}", path.display(), config.mode.as_str()));
    }
    let resolved = config.output_dir.join("config.resolved");
    if let Err(e) = output::write_file(&resolved, &config.to_config_string()) {
        return fail(CONFIG_ERROR, &e.to_string());
    }
    if simulate {
        simulate_command(&config)
    } else {
        convergence_command(&config, assert_orders)
    }
}

fn fail(code: u8, message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn study_failure(e: StudyError) -> ExitCode {
    let code = if matches!(e, StudyError::Scheme(_)) { SOLVER_FAILURE } else { CONFIG_ERROR };
    fail(code, &e.to_string())
}

fn simulate_command(config: &RunConfig) -> ExitCode {
    let setup = match SimulationSetup::from_config(config) {
        Ok(s) => s,
        Err(e) => return study_failure(e),
    };
    eprintln!(
        "simulating {} cells per side, dt = {}, T = {}",
        config.resolutions[0], setup.dt, setup.final_time
    );
    let traj = match run_simulation(&setup) {
        Ok(t) => t,
        Err(e) => return study_failure(e),
    };
    if let Err(e) = write_trajectory(&config.output_dir, &traj, setup.diagnostics) {
        return fail(CONFIG_ERROR, &e.to_string());
    }
    match &traj.failure {
        Some(e) => fail(SOLVER_FAILURE, &format!("step {}: {e}", traj.final_state.m + 1)),
        None => {
            eprintln!("wrote {}", config.output_dir.display());
            ExitCode::SUCCESS
        }
    }
}

fn write_trajectory(dir: &Path, traj: &Trajectory, diagnostics: bool) -> Result<(), OutputError> {
    output::write_series_csv(&traj.series, &dir.join("series.csv"))?;
    if diagnostics {
        output::write_diagnostics_csv(&traj.diagnostics, &dir.join("diagnostics.csv"))?;
    }
    for state in &traj.snapshots {
        let path = dir.join(format!("snapshot_{:06}.vtk", state.m));
        output::write_vtk_snapshot(&traj.spaces, state, &path)?;
    }
    Ok(())
}

/// Observed orders outside `[lo, hi]`, as `var/norm row: order` strings.
fn orders_outside(report: &ErrorReport, (lo, hi): (f64, f64)) -> Vec<String> {
    let mut bad = Vec::new();
    for (var, norm, orders) in report.all_orders() {
        for (row, order) in report.rows.iter().zip(orders) {
            if let Some(p) = order.filter(|p| !(lo..=hi).contains(p)) {
                bad.push(format!("{var}/{norm} at {}: {p:.4}", row.label));
            }
        }
    }
    bad
}

fn convergence_command(config: &RunConfig, assert_orders: Option<(f64, f64)>) -> ExitCode {
    eprintln!("convergence study over {} runs", config.resolutions.len().max(config.dt.len()));
    let report = match run_convergence_study(config) {
        Ok(r) => r,
        Err(e) => return study_failure(e),
    };
    let path = config.output_dir.join("convergence.csv");
    if let Err(e) = output::write_convergence_csv(&report, &path) {
        return fail(CONFIG_ERROR, &e.to_string());
    }
    print!("{}", output::convergence_csv(&report));
    let failed = report.failed_rows();
    if !failed.is_empty() {
        for row in &failed {
            eprintln!("run {} failed: {}", row.label, row.errors.as_ref().err().map_or("", |s| s.as_str()));
        }
        return ExitCode::from(SOLVER_FAILURE);
    }
    if let Some(interval) = assert_orders {
        let bad = orders_outside(&report, interval);
        if !bad.is_empty() {
            for b in &bad {
                eprintln!("order outside [{}, {}]: {b}", interval.0, interval.1);
            }
            return ExitCode::from(ORDER_FAILURE);
        }
    }
    ExitCode::SUCCESS
}

#[cfg(test)]
mod tests {
    use super::*;
    use chemofluid::config::parse_config_str;
    use chemofluid::mms::AccumulatedNorms;
    use chemofluid::study::{Axis, ReportRow, RunErrors};

    #[test]
    fn intervals() {
        assert_eq!(parse_interval("1.8,2.15"), Ok((1.8, 2.15)));
        assert_eq!(parse_interval(" 0.5 , 1 "), Ok((0.5, 1.0)));
        assert!(parse_interval("2").is_err());
        assert!(parse_interval("2,1").is_err());
        assert!(parse_interval("a,1").is_err());
    }

    #[test]
    fn overrides_are_checked() {
        let text = "mode = simulate\ninitial = competition-2d\n[mesh]\nresolutions = 4\n[time]\ndt = 0.1\nfinal = 1\n";
        let mut config = parse_config_str(text).unwrap();
        let none = Overrides { out: None, tol: None, snapshots: None };
        apply(&none, &mut config).unwrap();
        assert_eq!(config, parse_config_str(text).unwrap());

        let good = Overrides { out: Some("x".into()), tol: Some(1e-8), snapshots: Some(vec![0.0, 1.0]) };
        apply(&good, &mut config).unwrap();
        assert_eq!(config.output_dir, PathBuf::from("x"));
        assert_eq!(config.tol, 1e-8);
        assert_eq!(config.snapshots, [0.0, 1.0]);

        let late = Overrides { out: None, tol: None, snapshots: Some(vec![2.0]) };
        assert!(apply(&late, &mut config).is_err());
        let loose = Overrides { out: None, tol: Some(1.5), snapshots: None };
        assert!(apply(&loose, &mut config).is_err());
    }

    #[test]
    fn order_assertion_skips_undefined_orders() {
        let norms = |s: f64| AccumulatedNorms { linf_l2: s, l2_h1: 2.0 * s, linf_h1: 2.0 * s };
        let report = ErrorReport {
            axis: Axis::Space,
            rows: vec![
                ReportRow { label: "10".into(), resolution: 0.1, errors: Ok(RunErrors([norms(4e-2); 5])) },
                ReportRow { label: "20".into(), resolution: 0.05, errors: Ok(RunErrors([norms(1e-2); 5])) },
            ],
        };
        assert!(orders_outside(&report, (1.9, 2.1)).is_empty());
        assert_eq!(orders_outside(&report, (0.5, 1.5)).len(), 12);
    }
}
