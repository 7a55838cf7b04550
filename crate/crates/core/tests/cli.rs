use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn specreg() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_specreg"));
    cmd.env_remove("SPECREG_OUT").env_remove("RUST_LOG");
    cmd
}

fn run(args: &[&str]) -> Output {
    specreg().args(args).output().expect("binary runs")
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, cfg: Value, out: &str) -> PathBuf {
    let c = write_json(dir, &format!("{out}.sim.json"), &cfg);
    let out = dir.join(out);
    let o = run(&["simulate", "-c", s(&c), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn trig_fixture() -> Value {
    // Support 7 in the trig basis.
    json!({
        "signal": {"model": "trig_poly", "values": [0.3, 1.0, -0.5, 0.25, 0.2, -0.1, 0.05]},
        "sigma": 0.0, "n": 256, "seed": 1
    })
}

#[test]
fn simulate_writes_csv_metadata_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), trig_fixture(), "sim");
    let csv = fs::read_to_string(out.join("observations.csv")).unwrap();
    assert!(csv.starts_with("i,t,y\n"));
    assert_eq!(csv.lines().count(), 257);
    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("observations.json")).unwrap()).unwrap();
    assert_eq!(meta["n"], 256);
    assert!(out.join("config.json").exists());
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "signal": {"model": "power_law", "delta": 3.0, "scale": 1.0},
        "kernel": {"model": "power_law", "theta": 1.0, "scale": 1.0},
        "sigma": 0.5, "n": 512, "seed": 42
    });
    let a = simulate(dir.path(), cfg.clone(), "a");
    let b = simulate(dir.path(), cfg, "b");
    for f in ["observations.csv", "observations.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = trig_fixture();
    cfg["sigma"] = json!(0.1);
    let c = write_json(dir.path(), "c.json", &cfg);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["simulate", "-c", s(&c), "-o", s(&a)]).status.success());
    assert!(run(&["simulate", "-c", s(&c), "-o", s(&b), "--seed", "2"]).status.success());
    assert_ne!(
        fs::read(a.join("observations.csv")).unwrap(),
        fs::read(b.join("observations.csv")).unwrap()
    );
}

#[test]
fn negative_theta_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_json(
        dir.path(),
        "c.json",
        &json!({
            "signal": {"model": "power_law", "delta": 3.0, "scale": 1.0},
            "kernel": {"model": "power_law", "theta": -1.0, "scale": 1.0},
            "sigma": 0.5, "n": 64, "seed": 1
        }),
    );
    let o = run(&["simulate", "-c", s(&c), "-o", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theta"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_documents_config_keys() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for key in ["n_grid", "replications", "sigma_source", "gamma_override", "energy_truncation", "SPECREG_OUT"] {
        assert!(text.contains(key), "{key} missing from --help");
    }
}

#[test]
fn noiseless_fixture_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), trig_fixture(), "sim");
    let c = write_json(dir.path(), "e.json", &json!({"kernel": {"model": "identity"}, "sigma": 0.0}));
    let out = dir.path().join("est");
    let o = run(&[
        "estimate", "--obs", s(&sim.join("observations.csv")), "-c", s(&c), "--grid", "64", "-o", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["truncation"], 7);

    let values = [0.3, 1.0, -0.5, 0.25, 0.2, -0.1, 0.05];
    let truth = |t: f64| {
        values
            .iter()
            .enumerate()
            .map(|(i, c)| c * specreg::basis::eval_basis(i + 1, t).unwrap())
            .sum::<f64>()
    };
    let grid = fs::read_to_string(out.join("f_hat.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("t,f_hat"));
    let mut count = 0;
    for line in lines {
        let mut it = line.split(',').map(|x| x.parse::<f64>().unwrap());
        let (t, f) = (it.next().unwrap(), it.next().unwrap());
        assert!((f - truth(t)).abs() < 1e-8, "t={t}: {f} vs {}", truth(t));
        count += 1;
    }
    assert_eq!(count, 64);
}

#[test]
fn sigma_estimate_origin_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = trig_fixture();
    cfg["sigma"] = json!(0.2);
    cfg["n"] = json!(1024);
    let sim = simulate(dir.path(), cfg, "sim");
    let c = write_json(dir.path(), "e.json", &json!({"kernel": {"model": "identity"}}));
    let out = dir.path().join("est");
    let o = run(&[
        "estimate", "--obs", s(&sim.join("observations.csv")), "-c", s(&c), "--sigma", "estimate", "--variant",
        "penalized", "-o", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("estimate.json")).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["sigma_used"]["origin"], "rss", "{text}");
    let v = report["sigma_used"]["value"].as_f64().unwrap();
    assert!((v - 0.2).abs() < 0.03, "{v}");
}

#[test]
fn penalized_at_tiny_n_fails_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = trig_fixture();
    cfg["n"] = json!(24);
    cfg["sigma"] = json!(0.1);
    let sim = simulate(dir.path(), cfg, "sim");
    let c = write_json(dir.path(), "e.json", &json!({"kernel": {"model": "identity"}, "sigma": 0.1}));
    let out = dir.path().join("est");
    let o = run(&[
        "estimate", "--obs", s(&sim.join("observations.csv")), "-c", s(&c), "--variant", "penalized", "-o", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("n too small for gamma plug-in"), "{}", stderr(&o));
    assert!(!out.join("estimate.json").exists());
}

#[test]
fn malformed_csv_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "i,t,y\n1,0.25,0.1\n2,0.5,abc\n3,0.75,0.2\n4,1,0.0\n").unwrap();
    let c = write_json(dir.path(), "e.json", &json!({"kernel": {"model": "identity"}, "sigma": 0.1}));
    let o = run(&["estimate", "--obs", s(&csv), "-c", s(&c), "-o", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn energy_subcommand_reports_regions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = trig_fixture();
    cfg["sigma"] = json!(0.1);
    cfg["n"] = json!(2048);
    let sim = simulate(dir.path(), cfg, "sim");
    let c = write_json(dir.path(), "e.json", &json!({"kernel": {"model": "identity"}, "sigma": 0.1}));
    let out = dir.path().join("en");
    let o = run(&["energy", "--obs", s(&sim.join("observations.csv")), "-c", s(&c), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("energy.json")).unwrap()).unwrap();
    let h = v["estimate"]["h_hat"].as_f64().unwrap();
    let truth: f64 = [0.3f64, 1.0, -0.5, 0.25, 0.2, -0.1, 0.05].iter().map(|c| c * c).sum();
    assert!((h - truth).abs() < 0.05, "{h} vs {truth}");
    let regions = v["regions"].as_array().unwrap();
    assert!(regions.iter().any(|r| r["kind"] == "energy"));
    assert!(regions.iter().any(|r| r["kind"] == "energy_fisher"));
}

fn mc_config(replications: usize) -> Value {
    json!({
        "scenario": "cli-test",
        "kernel": {"model": "power_law", "theta": 1.0, "scale": 1.0},
        "signal": {"model": "power_law", "delta": 3.0, "scale": 1.0},
        "sigma": 0.5,
        "n_grid": [256, 512],
        "replications": replications,
        "seed": 7
    })
}

#[test]
fn mc_risk_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_json(dir.path(), "mc.json", &mc_config(8));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["mc-risk", "-c", s(&c), "-o", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["risk.csv", "summary.json", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let echoed: Value = serde_json::from_str(&fs::read_to_string(a.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["seed"], 7);
    assert_eq!(echoed["replications"], 8);
}

#[test]
fn single_replication_is_flagged_unreliable() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_json(dir.path(), "mc.json", &mc_config(1));
    let out = dir.path().join("o");
    let o = run(&["mc-risk", "-c", s(&c), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["unreliable"], true);
}

#[test]
fn replications_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_json(dir.path(), "mc.json", &mc_config(50));
    let out = dir.path().join("o");
    let o = run(&["mc-risk", "-c", s(&c), "--replications", "3", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["replications"], 3);
}

#[test]
fn output_directory_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_json(dir.path(), "c.json", &trig_fixture());
    let env_out = dir.path().join("from-env");
    let o = specreg()
        .args(["simulate", "-c", s(&c)])
        .env("SPECREG_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_out.join("observations.csv").exists());
}

#[test]
fn rate_check_rejects_non_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mc_config(2);
    cfg["signal"] = json!({"model": "trig_poly", "values": [1.0, 0.5]});
    let c = write_json(dir.path(), "mc.json", &cfg);
    let o = run(&["rate-check", "-c", s(&c), "-o", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn mc_gamma_on_trig_poly_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mc_config(2);
    cfg["signal"] = json!({"model": "trig_poly", "values": [1.0, 0.5]});
    cfg["n_grid"] = json!([1024]);
    let c = write_json(dir.path(), "mc.json", &cfg);
    let out = dir.path().join("o");
    let o = run(&["mc-gamma", "-c", s(&c), "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["details"]["applicable"], false, "{v}");
}

#[test]
fn failed_run_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mc_config(2);
    cfg["n_grid"] = json!([8]);
    let c = write_json(dir.path(), "mc.json", &cfg);
    let out = dir.path().join("o");
    let o = run(&["mc-coverage", "-c", s(&c), "-o", s(&out)]);
    assert!(!o.status.success());
    let leftovers: Vec<_> = fs::read_dir(&out).map(|d| d.flatten().map(|e| e.path()).collect()).unwrap_or_default();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}
