use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn chemo4d(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chemo4d"));
    cmd.args(args).env_remove("CHEMO4D_THREADS");
    if let Some(t) = threads {
        cmd.env("CHEMO4D_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SHORT_RUN: &str = "[grid]\nn = 256\n[stepper]\nt_end = 1.0\nsnapshot_every = 5\n";

#[test]
fn zero_horizon_writes_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[grid]\nn = 256\n[stepper]\nt_end = 0.0\n");
    let out = tmp.path().join("o");
    let o = chemo4d(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,mass_u,entropy,F_lyap,D_diss,L_energy,D1_diss,sup_u,residual");
    assert!(lines[1].starts_with("0,"));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(summary["verdict"].is_null());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SHORT_RUN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(chemo4d(&["run", &cfg, "--out", dir.to_str().unwrap(), "--seed", "5"], None).status.success());
    }
    let (x, y) = (fs::read(a.join("series.csv")).unwrap(), fs::read(b.join("series.csv")).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    assert_eq!(json(&a.join("summary.json"))["config_hash"], json(&b.join("summary.json"))["config_hash"]);
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SHORT_RUN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(chemo4d(&["run", &cfg, "--out", a.to_str().unwrap()], None).status.success());
    let o = chemo4d(
        &["run", &cfg, "--out", b.to_str().unwrap(), "--grid-n", "300", "--grid-R", "15", "--dt", "0.02"],
        None,
    );
    assert!(o.status.success());
    let (sa, sb) = (json(&a.join("summary.json")), json(&b.join("summary.json")));
    assert_ne!(sa["config_hash"], sb["config_hash"]);
    assert_eq!(sb["run"]["steps"], 50);
    assert_eq!(sa["run"]["steps"], 100);
}

#[test]
fn bad_config_writes_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[grid]\nradius = 3\n");
    let out = tmp.path().join("o");
    let o = chemo4d(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let err = json(&out.join("error.json"));
    assert_eq!(err["kind"], "config");
    assert_eq!(err["schema_version"], 1);

    let cfg = write_config(tmp.path(), "d.toml", "[grid]\nn = 256\n");
    let o = chemo4d(&["crosscheck", &cfg, "--out", out.to_str().unwrap(), "--T", "0.6"], None);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&out.join("error.json"))["experiment"], "picard_crosscheck");

    let o = chemo4d(&["run", &cfg, "--out", out.to_str().unwrap()], Some("many"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stopped_run_is_flagged_partial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[grid]\nn = 256\n[stepper]\nt_end = 1.0\ndt_min = 0.005\n[initial]\nwidth = 0.7\nmass = 5000.0\nsignal = \"quasi_steady\"\n",
    );
    let out = tmp.path().join("o");
    let o = chemo4d(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&out.join("summary.json"))["partial"], true);
    assert_eq!(json(&out.join("error.json"))["kind"], "partial_run");
    assert!(out.join("series.csv").exists());
}

#[test]
fn empty_sweep_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SHORT_RUN);
    let out = tmp.path().join("o");
    let o = chemo4d(&["sweep", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 1);
    assert_eq!(json(&out.join("summary.json"))["verdicts"], Value::Array(vec![]));
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SHORT_RUN);
    let mut tables = Vec::new();
    for t in ["1", "3"] {
        let out = tmp.path().join(t);
        let o = chemo4d(&["sweep", &cfg, "--out", out.to_str().unwrap(), "--masses", "10,50,120"], Some(t));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        tables.push(fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(String::from_utf8_lossy(&tables[0]).lines().count(), 4);

    let out = tmp.path().join("unsorted");
    let o = chemo4d(&["sweep", &cfg, "--out", out.to_str().unwrap(), "--masses", "50,10"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_witness_suite_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "seed = 17\n");
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = chemo4d(&["ineq", &cfg, "--n", "1", "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
        files.push(fs::read_to_string(out.join("inequalities.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let lines: Vec<&str> = files[0].lines().collect();
    assert_eq!(lines.len(), 1 + 1 + 19);
    assert!(lines[1].starts_with(",constant_identity,"));
    assert!(lines[2..].iter().all(|l| l.starts_with("0,")));
}

#[test]
fn zero_data_crosscheck_agrees_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[grid]\nn = 256\n[initial]\nmass = 0.0\n");
    let out = tmp.path().join("o");
    let o = chemo4d(&["crosscheck", &cfg, "--T", "0.05", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    for k in ["diff_u", "diff_v", "diff_w"] {
        assert_eq!(s["result"][k], 0.0);
    }
}
