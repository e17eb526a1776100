use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn conjugate(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conjugate"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn conjugate")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_four_days_by_default() {
    let dir = tempfile::tempdir().unwrap();
    ok(&conjugate(dir.path(), &["simulate"]));
    let text = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut lines = text.lines();
    let config: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(config["n_days"], 4);
    assert_eq!(config["q0"], 10.0);
    assert_eq!(lines.next(), Some("time,state,day_index"));
    let mut days = std::collections::BTreeSet::new();
    let mut last_time = -1.0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let time: f64 = f[0].parse().unwrap();
        assert!(time >= last_time && (0.0..=4.0).contains(&time));
        assert!(f[1] == "0" || f[1] == "1");
        days.insert(f[2].parse::<usize>().unwrap());
        last_time = time;
    }
    assert_eq!(days.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert!(dir.path().join("latent.csv").exists());
}

#[test]
fn simulate_degenerate_latent_gives_constant_path() {
    let dir = tempfile::tempdir().unwrap();
    ok(&conjugate(dir.path(), &["simulate", "--set", "n_days=1", "--set", "theta_levels=[1.0]"]));
    let text = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let states: Vec<&str> = text.lines().skip(2).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert!(!states.is_empty() && states.iter().all(|&s| s == "0"), "{states:?}");
}

#[test]
fn same_seed_reproduces_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&conjugate(a.path(), &["simulate", "--seed", "5"]));
    ok(&conjugate(b.path(), &["simulate", "--seed", "5", "--workers", "3"]));
    for f in ["simulate.csv", "latent.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn estimate_writes_kernels_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    ok(&conjugate(dir.path(), &["estimate", "--set", "m=8", "--set", "n=200", "--seed", "3"]));
    let r = json(&dir.path().join("r_hat.json"));
    assert_eq!(r["config"]["seed"], 3);
    assert_eq!(r["kernel"]["kind"], "r_hat");
    assert_eq!(r["kernel"]["provenance"]["n"], 200);
    assert_eq!(r["kernel"]["values"].as_array().unwrap().len(), 8);
    let csv = std::fs::read_to_string(dir.path().join("c1_hat.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));
    assert_eq!(csv.lines().count(), 2 + 8);
}

#[test]
fn spectrum_of_population_operator_is_rank_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&conjugate(dir.path(), &["spectrum", "--set", "source=population"]));
    let s = json(&dir.path().join("spectrum.json"));
    let ev: Vec<f64> = s["spectrum"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(ev[0] > 1e-6);
    assert!(ev[1].abs() < 1e-12);
    assert_eq!(s["config"]["source"], "population");
}

#[test]
fn mixing_default_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(&conjugate(dir.path(), &["mixing"]));
    let m = json(&dir.path().join("mixing.json"));
    let entries = m["entries"].as_array().unwrap();
    for e in entries {
        for key in ["k", "w", "psi_latent", "psi_observed", "attained_atoms", "factorization_max_abs_gap"] {
            assert!(e.get(key).is_some(), "missing {key}");
        }
        if e["k"].as_u64().unwrap() >= 2 {
            assert_eq!(e["psi_latent"].as_f64(), Some(0.0));
        }
        assert_eq!(e["factorization_max_abs_gap"].as_f64(), Some(0.0));
    }
    let first = &entries[0];
    assert_eq!((first["psi_latent_exact"].as_str(), first["psi_observed_exact"].as_str()), (Some("1"), Some("1/16")));
}

#[test]
fn montecarlo_summary_carries_reference_value() {
    let dir = tempfile::tempdir().unwrap();
    ok(&conjugate(dir.path(), &["montecarlo", "--set", "replications=10", "--set", "n_values=[50,100]"]));
    let s = json(&dir.path().join("montecarlo_summary.json"));
    assert!((s["reference_value"].as_f64().unwrap() - 0.020833).abs() < 1e-6);
    assert_eq!(s["config"]["replications"], 10);
    assert_eq!(s["summaries"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("montecarlo_replications.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("n,rep,value"));
    assert_eq!(csv.lines().count(), 2 + 20);
}

#[test]
fn rate_reports_fit() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["--set", "replications=4", "--set", "n_values=[50,100,200]", "--set", "m=8"];
    ok(&conjugate(dir.path(), &[&["rate"][..], &sets].concat()));
    let s = json(&dir.path().join("rate_summary.json"));
    assert!(s["fit"]["slope"].as_f64().unwrap().is_finite());
    assert_eq!(s["points"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_and_overrides_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"n_days": 2, "q0": 5.0}"#).unwrap();
    ok(&conjugate(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--set", "q0=7"]));
    let text = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let config: Value = serde_json::from_str(text.lines().next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!((config["n_days"].as_u64(), config["q0"].as_f64()), (Some(2), Some(7.0)));
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--set", "q0=-1"][..],
        &["estimate", "--set", "unknown=1"],
        &["mixing", "--set", "probs=[0.3,0.3]"],
        &["rate", "--set", "n_values=[100,200]"],
        &["spectrum", "--full"],
    ] {
        let o = conjugate(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    let o = conjugate(&file.join("sub"), &["simulate"]);
    assert_eq!(o.status.code(), Some(3));
}
