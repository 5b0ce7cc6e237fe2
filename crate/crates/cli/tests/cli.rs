use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ricci-lab-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn lab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn spectral_identities_pass() {
    let out = out_dir("spectral");
    let o = lab(&out, &["spectral", "--identities", "--tau", "-1e4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(&out);
    assert_eq!(s["schema"], 1);
    assert_eq!(s["command"], "spectral");
    assert_eq!(s["passed"], true);
    assert_eq!(s["config"]["tau"][0], -1e4);
    assert!(s["checks"].as_array().unwrap().len() >= 7);
    assert!(String::from_utf8(o.stdout).unwrap().lines().any(|l| l.starts_with("PASS square_identity")));
}

#[test]
fn bryant_reports_c0() {
    let out = out_dir("bryant");
    let o = lab(&out, &["bryant", "--rho-max", "40"]);
    assert_eq!(code(&o), 0);
    let s = summary(&out);
    assert!((s["results"]["C0"].as_f64().unwrap() + 1.0).abs() < 1e-3);
    assert_eq!(s["config"]["rho_max"], 40.0);
    assert!(std::fs::read_to_string(out.join("bryant.csv")).unwrap().lines().count() > 1000);
}

#[test]
fn summaries_are_deterministic() {
    let (a, b) = (out_dir("det-a"), out_dir("det-b"));
    for dir in [&a, &b] {
        assert_eq!(code(&lab(dir, &["residual", "--tau-ladder", "100,200", "--tip-tau", "-200"])), 0);
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    for f in ["summary.json", "ladder.csv", "profile_tau200.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn json_only_prints_the_summary() {
    let out = out_dir("json");
    let o = lab(&out, &["--json-only", "predict", "--t", "-1e6,-1e4"]);
    assert_eq!(code(&o), 0);
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s, summary(&out));
    let d = s["results"]["predictions"][0]["d"].as_f64().unwrap();
    assert!((d - 14867.689).abs() < 1e-3);
    assert!(std::fs::read_to_string(out.join("predictions.csv")).unwrap().starts_with("t,k,d\n"));
}

#[test]
fn quiet_prints_nothing() {
    let out = out_dir("quiet");
    let o = lab(&out, &["--quiet", "predict"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty() && o.stderr.is_empty());
    assert_eq!(code(&lab(&out, &["--quiet", "--json-only", "predict"])), 2);
}

#[test]
fn flags_override_the_config_file() {
    let out = out_dir("config");
    std::fs::create_dir_all(&out).unwrap();
    let cfg = out.join("run.cfg");
    std::fs::write(&cfg, "# sweep\nt = -1e4, -1e5\n").unwrap();
    assert_eq!(code(&lab(&out, &["--config", cfg.to_str().unwrap(), "predict"])), 0);
    assert_eq!(summary(&out)["config"]["t"], serde_json::json!([-1e4, -1e5]));
    assert_eq!(code(&lab(&out, &["--config", cfg.to_str().unwrap(), "predict", "--t", "-1e8"])), 0);
    assert_eq!(summary(&out)["config"]["t"], serde_json::json!([-1e8]));
}

#[test]
fn config_errors_exit_with_two() {
    let out = out_dir("bad");
    std::fs::create_dir_all(&out).unwrap();
    let cfg = out.join("bad.cfg");
    std::fs::write(&cfg, "colour = red\n").unwrap();
    let cases: [&[&str]; 6] = [
        &["--config", cfg.to_str().unwrap(), "predict"],
        &["predict", "--t", "-3"],
        &["bryant", "--rho-max", "-1"],
        &["flow", "--fixture", "torus"],
        &["residual", "--region", "collar"],
        &["flow", "--fixture", "sphere", "--neck", "0.3"],
    ];
    for args in cases {
        let o = lab(&out, args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&lab(&out, &["launch"])), 2);
}

#[test]
fn failed_assertions_exit_with_one() {
    let out = out_dir("fail");
    let o = lab(&out, &["residual", "--tau-ladder", "100,200", "--min-exponent", "3"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL parabolic_exponent"));
    assert_eq!(summary(&out)["passed"], false);
}

#[test]
fn flow_writes_snapshots_and_monitors() {
    let out = out_dir("flow");
    let o = lab(&out, &["flow", "--fixture", "sphere", "--n-sigma", "161", "--tau-end", "3", "--output-every", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(&out);
    let n = s["results"]["snapshots"].as_u64().unwrap() as usize;
    assert!(n >= 2);
    assert_eq!(s["config"]["fixture"]["kind"], "sphere");
    let monitors = std::fs::read_to_string(out.join("monitors.jsonl")).unwrap();
    assert_eq!(monitors.lines().count(), n);
    for line in monitors.lines() {
        let m: Value = serde_json::from_str(line).unwrap();
        assert!(m["q_max"].as_f64().unwrap() <= 1.0 + 1e-3);
    }
    assert!(std::fs::read_to_string(out.join("snapshot_0000.csv")).unwrap().starts_with("sigma,u\n"));
}
