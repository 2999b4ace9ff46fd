//! Command-line front end: `simulate`, `verify` and `diagnose`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{parse_config, SimConfig};
use crate::diagnostics::{
    check_energy_inequality, check_mass, check_monotone, read_csv, singularity_time_bound, write_csv, CheckReport,
    CheckStatus, DiagnosticsRecord, MonotoneKey, SingularityBound,
};
use crate::evolution::{run_with, RunOutput, Termination};
use crate::interface::{PlaneKind, Snapshot};
use crate::scenarios::{HALF_PLANE_SLOPE_LIMIT, PLANE_SLOPE_LIMIT};
use crate::verify::{run_suite, summary_table, Suite, SuiteOptions, DEFAULT_A};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OUT_DIR: &str = "muskat-out";

/// Exit status when a run or a check reports failure (as opposed to an
/// error, which exits with 2).
pub const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "muskat", version, about = "Muskat interface solver and verification suite")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an evolution from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the kernel and/or variational verification suites.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Comma-separated slope parameters.
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Re-check a finished run directory.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Kernels,
    Variational,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Kernels => Suite::Kernels,
            SuiteArg::Variational => Suite::Variational,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub termination: Termination,
    pub termination_detail: String,
    pub t_final: f64,
    pub records_count: usize,
    pub max_slope_monotone: bool,
    pub mass_drift: f64,
    pub blowup_accumulator_final: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub clamp_events: usize,
    pub clamp_mass: f64,
    pub warnings: Vec<String>,
}

impl RunSummary {
    pub fn from_output(out: &RunOutput) -> Self {
        let first = out.records.first();
        let last = out.records.last();
        // literal monotonicity, whatever the initial slope
        let monotone = check_monotone(&out.records, MonotoneKey::MaxSlope, 1e-6, f64::INFINITY);
        Self {
            schema_version: SUMMARY_SCHEMA_VERSION,
            termination: out.termination,
            termination_detail: out.detail.clone(),
            t_final: out.final_state.t,
            records_count: out.records.len(),
            max_slope_monotone: monotone.status != CheckStatus::Fail,
            mass_drift: match (first, last) {
                (Some(f), Some(l)) => l.l1_mass - f.l1_mass,
                _ => 0.0,
            },
            blowup_accumulator_final: last.map_or(0.0, |r| r.blowup_accumulator),
            steps: out.final_state.step_count,
            rejected_steps: out.final_state.reject_count,
            clamp_events: out.final_state.clamp_events,
            clamp_mass: out.final_state.clamp_mass,
            warnings: out.warnings.clone(),
        }
    }
}

/// Parses and dispatches; returns the process exit status.
pub fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Simulate { config, out, quiet } => cmd_simulate(&config, out.as_deref(), quiet),
        Command::Verify { suite, a, json } => cmd_verify(suite.into(), a.as_deref(), json.as_deref()),
        Command::Diagnose { run } => cmd_diagnose(&run),
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<SimConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// Writes to `path` through a temporary sibling so that a failed write
/// leaves no partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("partial");
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("writing {}", path.display()));
    }
    Ok(())
}

/// Writes `diagnostics.csv`, `snapshots/NNNN.json` and `summary.json`.
pub fn write_run(dir: &Path, out: &RunOutput) -> anyhow::Result<RunSummary> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).with_context(|| format!("creating {}", snap_dir.display()))?;
    let mut csv = Vec::new();
    write_csv(&out.records, &mut csv)?;
    write_atomic(&dir.join("diagnostics.csv"), &csv)?;
    for (k, s) in out.snapshots.iter().enumerate() {
        write_atomic(&snap_dir.join(format!("{k:04}.json")), serde_json::to_string(s)?.as_bytes())?;
    }
    let summary = RunSummary::from_output(out);
    write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(summary)
}

pub fn cmd_simulate(config: &Path, out: Option<&Path>, quiet: bool) -> anyhow::Result<u8> {
    let cfg = load_config(config)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    // fail on an unusable output path before spending time on the run
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;

    let mut last_report = 0;
    let output = run_with(&cfg, |s| {
        if !quiet && s.step_count >= last_report + 100 {
            last_report = s.step_count;
            eprintln!(
                "step {:>7}  t = {:.6e}  dt = {:.3e}  max slope = {:.6}",
                s.step_count,
                s.t,
                s.dt_last,
                s.profile.max_slope()
            );
        }
    })?;
    let summary = write_run(&dir, &output)?;
    if !quiet {
        for w in &summary.warnings {
            eprintln!("warning: {w}");
        }
        println!(
            "{} at t = {:.6e} after {} steps, {} records -> {}",
            summary.termination,
            summary.t_final,
            summary.steps,
            summary.records_count,
            dir.display()
        );
        println!("  {}", summary.termination_detail);
    }
    Ok(match output.termination {
        Termination::Completed | Termination::BlowupSuspected | Termination::WallClock => 0,
        Termination::NonFinite => EXIT_CHECK_FAILED,
    })
}

pub fn cmd_verify(suite: Suite, a: Option<&[f64]>, json: Option<&Path>) -> anyhow::Result<u8> {
    let a_list = a.unwrap_or(&DEFAULT_A);
    if a_list.is_empty() {
        bail!("--a needs at least one value");
    }
    let results = run_suite(suite, a_list, &SuiteOptions::default())?;
    print!("{}", summary_table(&results));
    if let Some(path) = json {
        write_atomic(path, serde_json::to_string_pretty(&results)?.as_bytes())?;
    }
    Ok(if results.iter().all(|r| r.pass) { 0 } else { EXIT_CHECK_FAILED })
}

/// Checks recomputed from a run directory.
#[derive(Debug, Clone)]
pub struct Diagnosis {
    pub reports: Vec<CheckReport>,
    pub bound: Option<SingularityBound>,
    pub t_final: f64,
}

impl Diagnosis {
    pub fn all_applicable_pass(&self) -> bool {
        self.reports.iter().all(|r| r.status != CheckStatus::Fail)
    }
}

pub fn diagnose_dir(dir: &Path) -> anyhow::Result<Diagnosis> {
    let csv_path = dir.join("diagnostics.csv");
    let file = fs::File::open(&csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let records: Vec<DiagnosticsRecord> = read_csv(file).with_context(|| format!("reading {}", csv_path.display()))?;
    let first_snapshot = dir.join("snapshots").join("0000.json");
    let initial = if first_snapshot.exists() {
        Some(Snapshot::read(&first_snapshot).with_context(|| format!("reading {}", first_snapshot.display()))?)
    } else {
        None
    };
    let plane = initial.as_ref().map(|s| s.domain.plane);
    let threshold = match plane {
        Some(PlaneKind::WholePlane) => PLANE_SLOPE_LIMIT,
        _ => HALF_PLANE_SLOPE_LIMIT,
    };
    let t_final = records.last().map_or(0.0, |r| r.t);
    let mut reports = vec![
        check_monotone(&records, MonotoneKey::MaxSlope, 1e-6, threshold),
        check_mass(&records, 1e-6),
        check_energy_inequality(&records, 1e-6, 0.1),
    ];
    let bound = match &initial {
        Some(s) => Some(singularity_time_bound(&s.to_profile()?)),
        None => None,
    };
    if let Some(SingularityBound::Bound { value, .. }) = &bound {
        let pass = *value > t_final;
        reports.push(CheckReport {
            check: "singularity_bound_consistent".into(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            worst: *value,
            worst_index: None,
            detail: format!("bound {value:.6e} vs final time {t_final:.6e}"),
        });
    }
    Ok(Diagnosis { reports, bound, t_final })
}

pub fn cmd_diagnose(dir: &Path) -> anyhow::Result<u8> {
    let d = diagnose_dir(dir)?;
    println!("{:<30} {:<8} detail", "check", "verdict");
    for r in &d.reports {
        let verdict = match r.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "N/A",
        };
        println!("{:<30} {:<8} {}", r.check, verdict, r.detail);
    }
    match &d.bound {
        Some(SingularityBound::Bound { value, mass }) => {
            println!("singularity time bound: {value:.6e} (mass {mass:.6e}, final time {:.6e})", d.t_final)
        }
        Some(SingularityBound::NotApplicable { reason }) => println!("singularity time bound: n/a ({reason})"),
        None => println!("singularity time bound: n/a (no initial snapshot)"),
    }
    Ok(if d.all_applicable_pass() { 0 } else { EXIT_CHECK_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grammar() {
        let c = Cli::try_parse_from(["muskat", "verify", "--suite", "variational", "--a", "0.1,0.3"]).unwrap();
        match c.command {
            Command::Verify { suite, a, json } => {
                assert_eq!(suite, SuiteArg::Variational);
                assert_eq!(a.unwrap(), vec![0.1, 0.3]);
                assert!(json.is_none());
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["muskat", "simulate"]).is_err());
        assert!(Cli::try_parse_from(["muskat", "verify", "--suite", "nope"]).is_err());
        let c = Cli::try_parse_from(["muskat", "simulate", "--config", "c.toml", "--quiet"]).unwrap();
        assert!(matches!(c.command, Command::Simulate { quiet: true, out: None, .. }));
    }

    #[test]
    fn verify_rejects_steep_slope() {
        let e = cmd_verify(Suite::Variational, Some(&[0.5]), None).unwrap_err();
        assert!(format!("{e:#}").contains("(0, 3/10]"));
    }
}
