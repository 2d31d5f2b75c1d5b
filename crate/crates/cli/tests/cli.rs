use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const KASNER: &str = r#"{
  "schema_version": 1,
  "kind": "cmc-family",
  "name": "kasner",
  "params": { "family": { "kind": "kasner", "exponents": [0.6666666666666666, 0.6666666666666666, -0.3333333333333333] } }
}"#;

fn cosmolab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosmolab")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn run_ok(tmp: &Path, config: &str, text: &str, out: &str) -> Value {
    write(tmp, config, text);
    let o = cosmolab(&["run", config, "--out", out], tmp);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    manifest(&tmp.join(out))
}

#[test]
fn minimal_kasner_run_lists_one_csv_and_one_certificate_bundle() {
    let tmp = TempDir::new().unwrap();
    let m = run_ok(tmp.path(), "kasner.json", KASNER, "out");
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(files.len(), 2);
    assert_eq!(files.iter().filter(|f| f.ends_with(".csv")).count(), 1);
    assert!(files.contains(&"certificates.json"));
    assert_eq!(m["status"], "ok");
    for v in m["verdicts"].as_array().unwrap() {
        assert_eq!(v["verdict"], "pass", "{v}");
    }
    let mut on_disk: Vec<String> = fs::read_dir(tmp.path().join("out")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.sort();
    assert_eq!(on_disk, ["certificates.json", "cmc_family.csv", "manifest.json"]);
}

#[test]
fn bessel_regression_reports_the_oracle_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"schema_version": 1, "kind": "gowdy-evolve",
        "params": {"N": 2, "n_y": 512, "s_end": 3.0, "decay": false, "initial": {"type": "bessel", "mode": 1, "amplitude": 0.5}}}"#;
    let m = run_ok(tmp.path(), "bessel.json", cfg, "out");
    let oracle = m["verdicts"].as_array().unwrap().iter().find(|v| v["name"] == "gowdy-bessel-oracle").unwrap();
    assert_eq!(oracle["verdict"], "pass");
    assert!(oracle["metrics"]["max_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "bad.json", r#"{"schema_version": 1, "kind": "gowdy-evolve", "params": {"n_y": 64, "s_end": 1.0, "initial": {"type": "random"}}}"#);
    let o = cosmolab(&["run", "bad.json", "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`N`"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = KASNER.replace(r#""kind": "kasner","#, r#""kind": "kasner", "colour": 1,"#);
    write(tmp.path(), "k.json", &cfg);
    let o = cosmolab(&["run", "k.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.family") && err.contains("colour"), "{err}");

    write(tmp.path(), "v.json", &KASNER.replace(r#""schema_version": 1"#, r#""schema_version": 7"#));
    assert_eq!(cosmolab(&["run", "v.json"], tmp.path()).status.code(), Some(2));
}

#[test]
fn failing_verdict_exits_1_and_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"schema_version": 1, "kind": "cmc-evolve", "tolerances": {"oracle": 1e-30},
        "params": {"family": {"kind": "cone", "dim": 3}, "t_start": 1.0, "t_end": 0.5, "steps": 400}}"#;
    write(tmp.path(), "c.json", cfg);
    let o = cosmolab(&["run", "c.json", "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(manifest(&tmp.path().join("out"))["status"], "fail");
}

#[test]
fn report_aggregates_and_flags_tampering() {
    let tmp = TempDir::new().unwrap();
    run_ok(tmp.path(), "a.json", KASNER, "a");
    let cone = r#"{"schema_version": 1, "kind": "cmc-family", "params": {"family": {"kind": "cone", "dim": 3}}}"#;
    run_ok(tmp.path(), "b.json", cone, "b");

    let o = cosmolab(&["report", "a/manifest.json", "b/manifest.json", "--csv", "summary.csv"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("manifest,kind,name,scenario_hash,status"));
    assert!(lines[1..].iter().all(|l| l.contains(",ok,")));

    let path = tmp.path().join("b/cmc_family.csv");
    let mut bytes = fs::read(&path).unwrap();
    bytes[40] ^= 1;
    fs::write(&path, bytes).unwrap();
    let o = cosmolab(&["report", "a/manifest.json", "b/manifest.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("digest-mismatch") && text.contains("cmc_family.csv"), "{text}");

    let o = cosmolab(&["report"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"schema_version": 1, "kind": "gowdy-evolve", "seed": 11,
        "params": {"N": 3, "n_y": 128, "s_end": 3.0, "initial": {"type": "random"}, "snapshot": true}}"#;
    let m1 = run_ok(tmp.path(), "g.json", cfg, "one");
    write(tmp.path(), "g.json", cfg);
    let o = cosmolab(&["run", "g.json", "--out", "two", "--threads", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let m2 = manifest(&tmp.path().join("two"));
    assert_eq!(m1["files"], m2["files"]);
    assert_eq!(m1["scenario_hash"], m2["scenario_hash"]);
    for f in ["gowdy_series.csv", "certificates.json", "final.gowdy"] {
        assert_eq!(fs::read(tmp.path().join("one").join(f)).unwrap(), fs::read(tmp.path().join("two").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn outputs_stay_inside_the_output_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = KASNER.replace(r#""name": "kasner","#, r#""name": "kasner", "output_dir": "results","#);
    write(tmp.path(), "k.json", &cfg);
    let o = cosmolab(&["run", "k.json"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let mut top: Vec<String> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    top.sort();
    assert_eq!(top, ["k.json", "results"]);
    assert!(tmp.path().join("results/manifest.json").exists());
}

#[test]
fn analyzing_snapshots_of_an_evolution() {
    let tmp = TempDir::new().unwrap();
    let evolve = |s_end: f64, out: &str| {
        let cfg = format!(
            r#"{{"schema_version": 1, "kind": "gowdy-evolve", "seed": 2,
            "params": {{"N": 2, "n_y": 128, "s_end": {s_end}, "decay": false, "initial": {{"type": "random"}}, "snapshot": true}}}}"#
        );
        run_ok(tmp.path(), &format!("{out}.json"), &cfg, out);
    };
    evolve(0.5, "early");
    evolve(1.0, "late");
    let cfg = r#"{"schema_version": 1, "kind": "gowdy-analyze",
        "params": {"snapshots": ["early/final.gowdy", "late/final.gowdy"], "decay": false}}"#;
    let m = run_ok(tmp.path(), "an.json", cfg, "an");
    let names: Vec<&str> = m["verdicts"].as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["gowdy-constraints", "gowdy-monotonicity"]);
    assert_eq!(m["status"], "ok");
}

#[test]
fn version_flag() {
    let o = Command::new(env!("CARGO_BIN_EXE_cosmolab")).arg("--version").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}
