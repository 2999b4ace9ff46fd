use std::path::Path;
use std::process::{Command, Output};

use muskat::cli::RunSummary;
use muskat::interface::Snapshot;

const CONSTANT: &str = r#"
N = 64
t_end = 0.5
snapshot_times = [0.25]

[domain]
plane = "half_plane"
boundary = { kind = "periodic", period = 1.0 }

[scenario]
kind = "constant"
level = 0.5
"#;

const TOUCHING: &str = r#"
N = 256
t_end = 1.0

[domain]
plane = "half_plane"
boundary = { kind = "periodic", period = 1.0 }

[scenario]
kind = "periodic_touching_bump"
slope_target = 0.27
"#;

fn muskat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muskat")).args(args).output().expect("spawn muskat")
}

fn simulate(dir: &Path, config: &str) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    muskat(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
}

fn summary(dir: &Path) -> RunSummary {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

#[test]
fn constant_run_completes_and_diagnoses_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate(tmp.path(), CONSTANT);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty(), "--quiet printed output");
    let s = summary(tmp.path());
    assert_eq!(s.schema_version, 1);
    assert_eq!(s.termination.to_string(), "completed");
    assert_eq!(s.t_final, 0.5);
    assert!(s.max_slope_monotone);
    assert_eq!(s.mass_drift, 0.0);

    let text = std::fs::read_to_string(tmp.path().join("out/diagnostics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,max_slope,l1_mass,l2_energy,lambda_dissipation,ln_dissipation,min_height,holder_fxx,blowup_accumulator"
    );
    // half-plane rows leave the whole-plane column empty
    assert!(lines.next().unwrap().contains(",,"));
    assert_eq!(text.lines().count() - 1, s.records_count);

    let snaps: Vec<_> = std::fs::read_dir(tmp.path().join("out/snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 3);
    let mid = Snapshot::read(&tmp.path().join("out/snapshots/0001.json")).unwrap();
    assert_eq!(mid.t, 0.25);
    assert_eq!(mid.n, 64);

    let d = muskat(&["diagnose", "--run", tmp.path().join("out").to_str().unwrap()]);
    assert!(d.status.success());
    let report = String::from_utf8_lossy(&d.stdout);
    assert!(report.contains("mass_conservation") && !report.contains("FAIL"), "{report}");
}

#[test]
fn snapshot_json_has_fixed_keys_and_roundtrips_bits() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(simulate(tmp.path(), TOUCHING).status.success());
    let path = tmp.path().join("out/snapshots/0000.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["N", "domain", "dx", "samples", "t"]);

    let snap = Snapshot::read(&path).unwrap();
    let again = tmp.path().join("copy.json");
    snap.write(&again).unwrap();
    let back = Snapshot::read(&again).unwrap();
    assert!(snap.samples.iter().zip(&back.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(std::fs::read_to_string(&again).unwrap(), text);
}

#[test]
fn touching_run_ends_in_suspected_blowup_with_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate(tmp.path(), TOUCHING);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path());
    assert_eq!(s.termination.to_string(), "BlowupSuspected");
    assert!(s.t_final < 1.0);

    let d = muskat(&["diagnose", "--run", tmp.path().join("out").to_str().unwrap()]);
    let report = String::from_utf8_lossy(&d.stdout);
    assert!(d.status.success(), "{report}");
    assert!(report.contains("singularity time bound:"), "{report}");
}

#[test]
fn bad_paths_fail_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = muskat(&[
        "simulate",
        "--config",
        tmp.path().join("missing.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    // output path blocked by a regular file
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, CONSTANT).unwrap();
    let o = muskat(&["simulate", "--config", cfg.to_str().unwrap(), "--out", blocker.join("run").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!blocker.join("run/diagnostics.csv").exists());
}

#[test]
fn invalid_config_lists_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate(tmp.path(), &TOUCHING.replace("slope_target = 0.27", "slope_target = 0.5"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3/10"));
    assert!(!tmp.path().join("out/diagnostics.csv").exists());
}

#[test]
fn truncated_csv_reports_row() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(simulate(tmp.path(), CONSTANT).status.success());
    let csv = tmp.path().join("out/diagnostics.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<&str> = text.lines().take(4).collect();
    let cut = &lines[3][..lines[3].len() / 2];
    lines[3] = cut;
    std::fs::write(&csv, lines.join("\n")).unwrap();
    let d = muskat(&["diagnose", "--run", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(d.status.code(), Some(2));
    let err = String::from_utf8_lossy(&d.stderr);
    assert!(err.contains("row 4"), "{err}");
}

#[test]
fn verify_kernels_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("verify-report.json");
    let o = muskat(&["verify", "--suite", "kernels", "--a", "0.3", "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["pass"] == true));
    assert!(String::from_utf8_lossy(&o.stdout).contains("checks passed"));
}

#[test]
fn verify_rejects_slope_outside_range() {
    let o = muskat(&["verify", "--suite", "variational", "--a", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(0, 3/10]"));
}
