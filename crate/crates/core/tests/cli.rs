use std::path::Path;
use std::process::{Command, Output};

use isw::io::{self, CsvTable};
use serde_json::Value;

fn isw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isw"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn error_of(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(last).unwrap_or_else(|_| panic!("stderr is not JSON: {stderr}"))
}

const SMALL: &[&str] = &["--half-length", "64", "--modes", "512", "--cs", "0.75"];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = isw(dir.path(), &with(&["solve", "--out", name], SMALL));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn profile_header_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = isw(dir.path(), &with(&["solve", "--out", "p.csv"], SMALL));
    assert!(out.status.success());
    let table = CsvTable::read(&dir.path().join("p.csv")).unwrap();
    assert_eq!(table.columns, ["x", "zeta", "v", "u"]);
    assert_eq!(table.rows.len(), 512);
    let h = table.header.unwrap();
    assert_eq!(h["command"], "solve");
    assert_eq!(h["speed"], 0.75);
    assert_eq!(h["report"]["converged"], true);
    assert!(h["report"].get("wall_time").is_none());
    assert_eq!(h["config"]["grid"]["modes"], 512);
}

#[test]
fn json_output_matches_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert!(isw(dir.path(), &with(&["solve", "--out", "p.json"], SMALL)).status.success());
    assert!(isw(dir.path(), &with(&["solve", "--out", "p.csv"], SMALL)).status.success());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    let profile = io::parse_profile(&std::fs::read_to_string(dir.path().join("p.csv")).unwrap()).unwrap();
    let zeta: Vec<f64> = serde_json::from_value(doc["zeta"].clone()).unwrap();
    assert_eq!(zeta, profile.state.zeta.values());
}

#[test]
fn analyze_reads_written_profiles() {
    let dir = tempfile::tempdir().unwrap();
    assert!(isw(dir.path(), &with(&["solve", "--out", "p.csv"], SMALL)).status.success());
    for kind in ["decay", "spectrum", "phase"] {
        let out_name = format!("{kind}.csv");
        let out = isw(dir.path(), &["analyze", kind, "--in", "p.csv", "--out", &out_name]);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let table = CsvTable::read(&dir.path().join(&out_name)).unwrap();
        let h = table.header.unwrap();
        if kind == "phase" {
            assert!(h["energy_residual"].as_f64().unwrap() < 1e-6);
        } else {
            assert!(h["fit"]["coefficients"][2].as_f64().unwrap() < 0.0);
            assert!(h["fit"]["r_squared"].as_f64().unwrap() > 0.99);
            assert!(dir.path().join(format!("{kind}.fit.json")).exists());
        }
    }
    // a written spectrum can itself be re-analyzed
    let out = isw(dir.path(), &["analyze", "spectrum", "--in", "spectrum.csv", "--out", "again.csv"]);
    assert!(out.status.success());
    let first: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.fit.json")).unwrap()).unwrap();
    let second: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("again.fit.json")).unwrap()).unwrap();
    assert_eq!(first["coefficients"], second["coefficients"]);
}

#[test]
fn exit_codes_and_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = isw(dir.path(), &["solve", "--gamma", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "domain");

    let out = isw(dir.path(), &with(&["solve", "--max-iter", "3", "--extrapolation", "off"], SMALL));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"], "not_converged");

    let out = isw(dir.path(), &["solve", "--cs", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "no_solitary_wave");

    let out = isw(dir.path(), &["solve", "--extrapolation", "rre"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "usage");

    std::fs::write(dir.path().join("bad.csv"), "x,zeta\n1,2\n").unwrap();
    let out = isw(dir.path(), &["analyze", "decay", "--in", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "input");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"params":{"gamma":0.5,"delta":0.5},"grid":{"half_length":64,"modes":256},"solver":{"cs":0.8},"output":{"path":"cfg.csv"}}"#,
    )
    .unwrap();
    let out = isw(dir.path(), &["solve", "--config", "run.json", "--cs", "0.78"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let h = CsvTable::read(&dir.path().join("cfg.csv")).unwrap().header.unwrap();
    assert_eq!(h["speed"], 0.78);
    assert_eq!(h["config"]["params"]["delta"], 0.5);
    assert!(h["amplitudes"]["zeta"].as_f64().unwrap() < 0.0);

    std::fs::write(dir.path().join("typo.json"), r#"{"param":{}}"#).unwrap();
    let out = isw(dir.path(), &["solve", "--config", "typo.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "config");
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_isw"))
        .current_dir(dir.path())
        .env("ISW_THREADS", "many")
        .args(["dispersion", "--count", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dispersion_and_oracle_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = isw(dir.path(), &["dispersion", "--k-max", "10", "--count", "11", "--out", "d.csv"]);
    assert!(out.status.success());
    let t = CsvTable::read(&dir.path().join("d.csv")).unwrap();
    assert_eq!(t.columns, ["k", "omega", "sigma"]);
    assert_eq!(t.rows.len(), 11);
    assert_eq!(t.header.unwrap()["sigma_order"]["order"], -1);

    let out = isw(dir.path(), &["oracle", "--cs", "0.75", "--x-max", "30", "--step", "0.01", "--out", "o.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = CsvTable::read(&dir.path().join("o.csv")).unwrap();
    assert_eq!(t.columns, ["x", "v", "dv", "zeta", "u"]);
    let v = t.column("v").unwrap();
    assert_eq!(v[0], t.header.clone().unwrap()["turning_point"].as_f64().unwrap());
    assert!(v.windows(2).all(|w| w[1] <= w[0]));

    // leftward waves: same interface, velocity flipped
    let out = isw(dir.path(), &["oracle", "--cs", "-0.75", "--x-max", "30", "--step", "0.01", "--out", "n.csv"]);
    assert!(out.status.success());
    let n = CsvTable::read(&dir.path().join("n.csv")).unwrap();
    let vn = n.column("v").unwrap();
    assert!(vn.iter().zip(&v).all(|(a, b)| *a == -*b));
    assert_eq!(n.column("zeta").unwrap(), t.column("zeta").unwrap());
}

#[test]
fn sweep_writes_fit_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = isw(
        dir.path(),
        &["sweep", "--half-length", "64", "--modes", "512", "--from", "0.05", "--to", "0.2", "--count", "5", "--out", "s.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = CsvTable::read(&dir.path().join("s.csv")).unwrap();
    assert_eq!(t.columns, ["cs", "zeta_max", "v_max", "u_max"]);
    let z = t.column("zeta_max").unwrap();
    assert!(z.windows(2).all(|w| w[1] > w[0]));
    let fit: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.fit.json")).unwrap()).unwrap();
    assert_eq!(fit["model"], "power_plus_constant");
}

#[test]
fn reproduce_profile_figure() {
    let dir = tempfile::tempdir().unwrap();
    let out = isw(dir.path(), &["reproduce", "fig2b", "--out-dir", "r", "--half-length", "64", "--modes", "512"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = std::fs::read_dir(dir.path().join("r"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3);
    for n in &names {
        assert!(n.starts_with("fig2b_cs"));
        let p = io::parse_profile(&std::fs::read_to_string(dir.path().join("r").join(n)).unwrap()).unwrap();
        let min = p.state.zeta.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min < 0.0);
    }
}
