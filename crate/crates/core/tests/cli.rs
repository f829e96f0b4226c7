use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn iwip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwip"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn config(experiment: &str, observable: &str, out: &Path, params: &str) -> String {
    format!(
        "experiment = \"{experiment}\"\nobservable = \"{observable}\"\nmaster_seed = 11\noutput_dir = {:?}\n[map]\nkind = \"doubling\"\n[params]\n{params}\n",
        out.to_str().unwrap()
    )
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn list_names_all_experiments() {
    let o = iwip(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "diagnose-gordin",
        "decompose",
        "wip",
        "iterated-wip",
        "sigma",
        "homogenise",
        "inequality-suite",
        "robustness",
    ] {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("{name} "))),
            "{name}"
        );
    }
    assert_eq!(text.matches("anchor:").count(), 8);
}

#[test]
fn gamma_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "experiment = \"sigma\"\nobservable = \"centered-base\"\noutput_dir = {:?}\n[map]\nkind = \"lsv\"\ngamma = 1.5\n",
        dir.path().join("out").to_str().unwrap()
    );
    let o = iwip(&["--config", &write_config(dir.path(), "c.toml", &body)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_and_missing_file_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(
        "sigma",
        "centered-x",
        &dir.path().join("out"),
        "replica = 4",
    );
    assert_eq!(
        code(&iwip(&[
            "--config",
            &write_config(dir.path(), "c.toml", &body)
        ])),
        2
    );
    assert_eq!(code(&iwip(&["--config", "/nonexistent/c.toml"])), 2);
    assert_eq!(code(&iwip(&[])), 2);
}

#[test]
fn sigma_writes_three_estimates_and_appends_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = config(
        "sigma",
        "centered-x",
        &out,
        "n = 5000\nreplicas = 1000\nmc_budget = 4000000",
    );
    let cfg = write_config(dir.path(), "sigma.toml", &body);
    let o = iwip(&["--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("sigma.json")).unwrap()).unwrap();
    for key in ["sigma_direct", "sigma_green_kubo", "sigma_martingale"] {
        assert!(!report[key].is_null(), "{key}");
    }
    assert_eq!(report["agreement"].as_array().unwrap().len(), 3);

    assert_eq!(code(&iwip(&["--config", &cfg])), 0);
    let ledger = fs::read_to_string(out.join("results.jsonl")).unwrap();
    let lines: Vec<Value> = ledger
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["experiment_id"], lines[1]["experiment_id"]);
    assert_eq!(lines[0]["payload"], lines[1]["payload"]);
    assert_eq!(lines[0]["passed"], Value::Bool(true));
}

#[test]
fn coboundary_iterated_wip_records_degeneracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = config(
        "iterated-wip",
        "coboundary",
        &out,
        "n = 4000\nreplicas = 400\ncorrelations = \"ulam\"",
    );
    let o = iwip(&["--config", &write_config(dir.path(), "c.toml", &body)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(
        report["payload"]["sigma"]["degeneracy"]["degenerate"],
        Value::Bool(true)
    );
    let verdict = report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["test_name"] == "degeneracy")
        .unwrap();
    assert!(verdict["notes"][0]
        .as_str()
        .unwrap()
        .starts_with("degenerate"));
}

#[test]
fn failing_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(
        "robustness",
        "centered-x",
        &dir.path().join("out"),
        "n = 4\nreplicas = 2000",
    );
    let o = iwip(&["--config", &write_config(dir.path(), "c.toml", &body)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL robustness"));
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(
        "wip",
        "cosine",
        &dir.path().join("unused"),
        "n = 2000\nreplicas = 300",
    );
    let cfg = write_config(dir.path(), "wip.toml", &body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = iwip(&[
            "--config",
            &cfg,
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
    for f in ["ensemble.csv", "path.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn seed_override_changes_results_and_stays_in_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = config("wip", "centered-x", &out, "n = 1000\nreplicas = 100");
    let cfg = write_config(dir.path(), "wip.toml", &body);
    assert!(code(&iwip(&["--config", &cfg])) <= 1);
    let first = fs::read(out.join("ensemble.csv")).unwrap();
    assert!(code(&iwip(&["--config", &cfg, "--seed", "12"])) <= 1);
    assert_ne!(first, fs::read(out.join("ensemble.csv")).unwrap());
    let mut top: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    top.sort();
    assert_eq!(top, ["out", "wip.toml"]);
    let mut inside: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    inside.sort();
    assert_eq!(
        inside,
        ["ensemble.csv", "path.csv", "report.json", "results.jsonl"]
    );
}
