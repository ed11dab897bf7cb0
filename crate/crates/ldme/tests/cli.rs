//! The `ldme` binary end to end: exit codes, report schema and
//! reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use ldme::io::validate_report;
use serde_json::Value;

fn ldme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldme")).args(args).env_remove("LDME_SEED").output().expect("binary runs")
}

fn read_report(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    validate_report(&v).unwrap();
    v
}

fn without_timings(mut v: Value) -> Value {
    v["timings"] = Value::Null;
    v
}

fn gen_mixture(dir: &Path, name: &str) -> String {
    let data = dir.join(name);
    let out = ldme(&[
        "gen-mixture", "--d", "8", "--per-cluster", "60", "--policy", "far-blob", "--outliers", "180", "--seed", "4",
        "--out", data.to_str().unwrap(), "--report", dir.join("gen.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data.to_str().unwrap().to_string()
}

#[test]
fn unknown_flag_exits_one() {
    assert_eq!(ldme(&["estimate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(ldme(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(ldme(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_and_bad_config_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = ldme(&["estimate", "--input", dir.path().join("absent").to_str().unwrap(), "--alpha", "0.25", "--sigma", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "alpha=0.25\ngamma=2\n").unwrap();
    let data = gen_mixture(dir.path(), "m.ldme");
    let out = ldme(&["estimate", "--input", &data, "--config", cfg.to_str().unwrap(), "--sigma", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
}

#[test]
fn estimate_reports_a_list_near_the_inliers() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_mixture(dir.path(), "m.ldme");
    let report = dir.path().join("r.json");
    let out = ldme(&["estimate", "--input", &data, "--alpha", "0.25", "--sigma", "1", "--seed", "3", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_report(&report);
    assert_eq!(v["command"], "estimate");
    assert_eq!(v["seed"], 3);
    let list = v["results"]["list"].as_array().unwrap();
    assert!(!list.is_empty() && list.len() <= 16);
    assert!(list.iter().all(|m| m.as_array().unwrap().len() == 8));
    assert!(v["results"]["inlier_mean_error"].as_f64().unwrap() < 2e3 / 0.5);
    assert!(v["results"]["iterations"].as_array().unwrap().len() == list.len());
}

#[test]
fn identical_seed_gives_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_mixture(dir.path(), "m.csv");
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = ldme(&["estimate", "--input", &data, "--alpha", "0.25", "--sigma", "1", "--seed", "9", "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
        without_timings(read_report(&p))
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn seed_precedence_env_then_flag_then_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed=5\n").unwrap();
    let seed_of = |args: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_ldme"));
        c.args(args).env_remove("LDME_SEED");
        if let Some(e) = env {
            c.env("LDME_SEED", e);
        }
        let out = c.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["seed"].as_u64().unwrap()
    };
    let base = ["sdp-solve", "--config", cfg.to_str().unwrap()];
    assert_eq!(seed_of(&base, None), 5);
    assert_eq!(seed_of(&[&base[..], &["--seed", "6"]].concat(), None), 6);
    assert_eq!(seed_of(&[&base[..], &["--seed", "6"]].concat(), Some("7")), 7);
    assert_eq!(seed_of(&["sdp-solve"], None), 0);
}

#[test]
fn sdp_solve_round_trips_instance_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.ldme");
    let r1 = dir.path().join("r1.json");
    let out = ldme(&["sdp-solve", "--seed", "2", "--verify", "--write-instance", inst.to_str().unwrap(), "--out", r1.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v1 = read_report(&r1);
    assert_eq!(v1["results"]["passed"], true);
    let r2 = dir.path().join("r2.json");
    let out = ldme(&["sdp-solve", "--input", inst.to_str().unwrap(), "--seed", "2", "--verify", "--out", r2.to_str().unwrap()]);
    assert!(out.status.success());
    let v2 = read_report(&r2);
    assert_eq!(v1["results"]["answer"], v2["results"]["answer"]);
}

#[test]
fn planted_generate_and_recover() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.ldmeg");
    let out = ldme(&["gen-planted", "--n", "200", "--alpha", "0.25", "--a", "60", "--b", "5", "--adversary", "mimic", "--seed", "1", "--out", g.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = dir.path().join("r.json");
    let out = ldme(&["planted-recover", "--input", g.to_str().unwrap(), "--out", r.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_report(&r);
    let sets = v["results"]["sets"].as_array().unwrap();
    assert!(!sets.is_empty());
    assert!(v["results"]["min_error"].as_u64().unwrap() <= 50);
}

#[test]
fn verify_quick_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("v.json");
    let out = ldme(&["verify", "--out", r.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_report(&r);
    assert_eq!(v["results"]["passed"], true);
    assert!(v["results"]["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn bench_reports_exponent() {
    let out = ldme(&["bench", "--sizes", "200,400", "--d", "10"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    validate_report(&v).unwrap();
    assert!(v["results"]["beta"].as_f64().unwrap().is_finite());
}
