use std::path::{Path, PathBuf};
use std::process::Command;

use bifurc_cli::commands::{cmd_nodal, parse_branch_csv};
use bifurc_cli::{CliError, Flags, RunConfig};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bifurc(config: &Path, out: &Path, args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_bifurc"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let interval = configs().join("interval.json");
    let square = configs().join("square.json");
    for out in [&a, &b] {
        for cmd in ["spectrum", "seeds", "h4"] {
            assert_eq!(bifurc(&square, out, &["--cmd", cmd]).0, 0);
        }
        assert_eq!(bifurc(&square, out, &["--cmd", "nodal"]).0, 0);
        assert_eq!(bifurc(&interval, out, &["--cmd", "branch", "--seed-id", "0"]).0, 0);
    }
    for name in [
        "spectrum.json",
        "seeds.json",
        "h4.json",
        "nodal.svg",
        "nodal_grid.csv",
        "branch_0.csv",
        "branch_0.csv.json",
        "seeds.manifest.json",
        "nodal.manifest.json",
    ] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
    let rows = parse_branch_csv(&String::from_utf8(read(&a, "branch_0.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[0].eps < w[1].eps));
}

#[test]
fn manifest_records_input_hash_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = configs().join("square.json");
    assert_eq!(bifurc(&config, tmp.path(), &["--cmd", "spectrum"]).0, 0);
    let m: serde_json::Value = serde_json::from_slice(&read(tmp.path(), "spectrum.manifest.json")).unwrap();
    assert_eq!(m["command"], "spectrum");
    assert_eq!(m["input_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["config"]["domain"]["kind"], "box");
    assert!(m.get("seconds").is_none());
    let timing: serde_json::Value = serde_json::from_slice(&read(tmp.path(), "spectrum.timing.json")).unwrap();
    assert!(timing["seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"domain": {"kind": "box", "lengths_sq": ["1"]}, "sigma": -1}"#).unwrap();
    let (code, err) = bifurc(&bad, tmp.path(), &["--cmd", "spectrum"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("sigma"));

    let missing = tmp.path().join("missing.json");
    assert_eq!(bifurc(&missing, tmp.path(), &["--cmd", "spectrum"]).0, 2);

    let disk = configs().join("disk.json");
    assert_eq!(bifurc(&disk, tmp.path(), &["--cmd", "h4"]).0, 2);
    assert_eq!(bifurc(&disk, tmp.path(), &["--cmd", "seeds"]).0, 0);

    let hyper = configs().join("hypercube.json");
    let (code, err) = bifurc(&hyper, tmp.path(), &["--cmd", "seeds"]);
    assert_eq!(code, 2, "{err}");

    let square = configs().join("square.json");
    assert_eq!(bifurc(&square, tmp.path(), &["--cmd", "branch"]).0, 2);
    assert_eq!(bifurc(&square, tmp.path(), &["--cmd", "branch", "--seed-id", "99"]).0, 2);

    // stability without a branch file is an I/O failure
    let fresh = tmp.path().join("fresh");
    assert_eq!(bifurc(&square, &fresh, &["--cmd", "stability", "--seed-id", "0"]).0, 1);
}

#[test]
fn zero_field_has_no_nodal_lines() {
    let cfg = RunConfig::from_json(
        r#"{"domain": {"kind": "box", "lengths_sq": ["1", "1"]}, "group": {"eigenvalue": 5},
            "nodal": {"coefficients": [[0, 0], [0, 0]], "resolution": 16}}"#,
    )
    .unwrap();
    let out = cmd_nodal(&cfg, &Flags::default()).unwrap();
    assert_eq!(out.polylines, 0);
    assert!(!out.svg.contains("polyline"));
    assert!(out.svg.starts_with("<svg"));
}

#[test]
fn nodal_rejects_tiny_resolution() {
    let cfg = RunConfig::from_json(
        r#"{"domain": {"kind": "box", "lengths_sq": ["1", "1"]}, "group": {"eigenvalue": 5},
            "nodal": {"coefficients": [[1, 0], [1, 0]]}}"#,
    )
    .unwrap();
    let err = cmd_nodal(&cfg, &Flags { resolution: Some(2), ..Flags::default() }).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(err, CliError::Core(_)));
}

#[test]
fn every_shipped_config_parses() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let (cfg, raw) = RunConfig::load(&path).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        assert!(!raw.is_empty());
    }
}
