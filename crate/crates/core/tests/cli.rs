//! Command-line behavior: outputs, exit codes and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use planar_invariants::config::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planar-invariants"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("spawn")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn every_shipped_config_parses() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn writes_csv_with_metadata_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = bin()
        .args(["kernel", "check", "--config"])
        .arg(configs().join("01_kernel_vs_disk.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# {") && header.contains("\"max_relative_error\""));
    assert_eq!(lines.next().unwrap(), "x,y,relative_error,extrapolated");
    assert_eq!(lines.count(), 49);
}

#[test]
fn stdout_output_is_reproducible() {
    let cfg = configs().join("02_halfplane_identities.json");
    let a = run(&["oracle"], &cfg);
    let b = run(&["oracle"], &cfg);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn subcommand_must_match_experiment_kind() {
    let o = run(
        &["metric", "sweep"],
        &configs().join("01_kernel_vs_disk.json"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel_check"));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"experiment": {"kind": "heins_invariance", "cases": 4, "seed": 1, "extra": 1}}"#,
    );
    let invalid = write(
        dir.path(),
        "i.json",
        r#"{"experiment": {"kind": "heins_value", "oracle": {"kind": "disk"}, "a": [0, 0], "r": 0.1, "nodes": 100}}"#,
    );
    for cfg in [unknown, invalid, dir.path().join("missing.json")] {
        let o = run(&["heins", "invariance"], &cfg);
        assert_eq!(o.status.code(), Some(1), "{}", cfg.display());
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn underresolved_points_name_the_required_node_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.json",
        r#"{"experiment": {"kind": "metric_check", "domain": {"kind": "ellipse", "a": 2.0, "b": 0.5},
            "points": {"kind": "grid", "n": 12}, "solver": {"kind": "uniform", "nodes_per_curve": 64}}}"#,
    );
    let o = run(&["metric", "check"], &cfg);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nodes per curve"));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(bin().output().unwrap().status.code(), Some(1));
    assert_eq!(
        bin()
            .args(["kernel", "frobnicate"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
    let help = bin().arg("--help").output().unwrap();
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("heins"));
}
