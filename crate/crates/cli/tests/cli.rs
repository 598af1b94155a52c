use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dnls-lab"))
}

fn run(args: &[&str]) -> Output {
    exe().args(args).output().expect("spawn")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dnls-lab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn classify_cites_norm_inflation() {
    let out = run(&["classify", "--alpha", "1", "--beta", "1", "--gamma", "-1", "--dim", "2", "--s", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "classify");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    let claims = r["result"]["claims"].as_array().unwrap();
    assert!(claims.iter().any(|c| c["kind"] == "NormInflation" && c["citation"] == "Theorem 1.4 (i)"));
}

#[test]
fn experiment_passes_at_ode_level() {
    let out = run(&["experiment", "--case", "NI_bg_pos_s", "--N", "1024", "--s", "0.5", "--level", "ode"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["pass"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(run(&["classify", "--alpha", "1"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--alpha", "1", "--beta", "1", "--gamma", "1", "--s", "x"]).status.code(), Some(2));
    assert_eq!(run(&["experiment", "--case", "nope", "--s", "0.5", "--N", "8"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--config", "/definitely/not/here.json"]).status.code(), Some(4));
    // M beyond the small-band regime breaks the sqrt(M) law
    assert_eq!(run(&["verify-counting", "--N", "64", "--M", "4,64,256"]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let d = scratch("config");
    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"alpha": 1, "beta": "1/2", "gamma": 3, "dim": 1, "s": 0.25}"#).unwrap();
    let r = report(&run(&["classify", "--config", cfg.to_str().unwrap(), "--dim", "3"]));
    assert_eq!(r["config"]["dim"], 3);
    assert_eq!(r["config"]["beta"], "1/2");
    assert_eq!(r["result"]["coefficients"][1], 0.5);
    std::fs::write(&cfg, r#"{"alpha": 1, "beta": 1, "gamma": 1, "s": 0, "colour": "blue"}"#).unwrap();
    assert_eq!(run(&["classify", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(run(&["classify", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn out_dir_holds_report_and_csv() {
    let d = scratch("out");
    let out = run(&["verify-modulation", "--sigma", "1,-2,-3", "--N", "32", "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["config"]["relation"], "1,2;3");
    assert!(r["result"]["c_min"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(d.join("data.csv")).unwrap();
    let mut lines = csv.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with(&format!("# dnls-lab {} verify-modulation {{", env!("CARGO_PKG_VERSION"))));
    assert_eq!(lines.next(), Some("c_min,triples,xi1,xi2,xi3"));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn vanishing_pairing_is_refused_unless_unguarded() {
    let d = scratch("pairing");
    let cfg = d.join("cfg.json");
    assert_eq!(run(&["verify-modulation", "--sigma", "1,-1,-1"]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"sigma": "1,-1,-1", "unguarded": true}"#).unwrap();
    let r = report(&run(&["verify-modulation", "--config", cfg.to_str().unwrap()]));
    assert_eq!(r["result"]["c_min"], 0.0);
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn sweep_from_config() {
    let d = scratch("sweep");
    let cfg = d.join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{"sweep": [
            {"case": "NI_bg_neg_s", "N": 16, "s": -0.5},
            {"case": "NU_alpha_gamma", "N": 256, "s": 0.5, "delta": 0.05}
        ]}"#,
    )
    .unwrap();
    let out = run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.join("data.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("NI_bg_neg_s,16,"));
    assert!(rows[1].starts_with("NU_alpha_gamma,256,"));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn gronwall_and_negative_control_cases() {
    let g = run(&["experiment", "--case", "gronwall", "--s", "0.5", "--delta", "0.1"]);
    assert_eq!(g.status.code(), Some(0));
    assert_eq!(report(&g)["result"]["entries"].as_array().unwrap().len(), 5);
    let n = run(&["experiment", "--case", "negative_control", "--N", "64", "--s", "0.5"]);
    assert_eq!(n.status.code(), Some(0));
}

#[test]
fn simulate_ode_and_crosscheck() {
    let s = run(&["simulate", "--N", "12", "--T", "0.02", "--seed", "3"]);
    assert_eq!(s.status.code(), Some(0));
    assert!(report(&s)["result"]["Q_drift"].as_f64().unwrap() <= 1e-6);
    let o = run(&["ode", "--N", "7", "--T", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let c = run(&["crosscheck", "--N", "8"]);
    assert_eq!(c.status.code(), Some(0));
    let r = report(&c);
    assert!(r["result"]["max_abs_diff"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn seeds_change_random_data() {
    let a = report(&run(&["ode", "--seed", "1"]));
    let b = report(&run(&["ode", "--seed", "2"]));
    assert_ne!(a["result"]["initial"], b["result"]["initial"]);
    assert_eq!(a, report(&run(&["ode", "--seed", "1"])));
}
