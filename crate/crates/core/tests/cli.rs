use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bellshape"));
    c.env_remove("BELLSHAPE_OUTPUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn scratch_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("bellshape-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn eval_example() {
    let out = run(&["eval", "--alpha", "0.5", "--x", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let value = v["report"]["evaluations"][0]["value"].as_f64().unwrap();
    assert!((value - 0.21969564).abs() < 5e-9);
    assert_eq!(v["command"], "eval");
    assert_eq!(v["config"]["series"]["rel_accuracy"], 1e-12);
}

#[test]
fn bellshape_example() {
    let out = run(&["bellshape", "--alpha", "0.5", "--max-order", "2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let orders = v["report"]["per_order"].as_array().unwrap();
    let zeros = |i: usize| -> Vec<f64> {
        orders[i]["zero_set"]["zeros"]
            .as_array()
            .unwrap()
            .iter()
            .map(|z| z["location"].as_f64().unwrap())
            .collect()
    };
    assert!((zeros(0)[0] - 1.0 / 6.0).abs() < 1e-9);
    let z2 = zeros(1);
    assert!((z2[0] - 0.061255).abs() < 5e-6 && (z2[1] - 0.272078).abs() < 5e-6);
    assert_eq!(v["pass"], true);
}

#[test]
fn factorize_example_and_csv_rows() {
    let out = run(&["factorize", "--alpha", "0.5", "--lambda", "1", "--terms", "10000"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out)["report"]["rows"][0]["identity"]["residual"].as_f64().unwrap();
    assert!(r.abs() < 1e-5);

    let out = run(&["factorize", "--alpha", "0.5", "--lambda", "0.5", "1", "2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("alpha,lambda,"));
}

#[test]
fn bellshape_csv_has_one_row_per_zero() {
    let out = run(&["bellshape", "--alpha", "0.5", "--max-order", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["order", "zero_index", "location", "bracket_width", "pass"]);
    assert_eq!(rdr.records().count(), 1 + 2 + 3);
}

#[test]
fn config_errors_exit_two() {
    for args in [
        &["eval", "--alpha", "1.5", "--x", "1"][..],
        &["eval", "--alpha", "0.5"],
        &["wbs", "--n", "0"],
        &["conjecture", "--b", "2", "--n", "3"],
        &["nonsense"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn failed_checks_exit_one() {
    // the exponent identity cannot hold to 1e-12 with only ten rates
    let out = run(&["factorize", "--alpha", "0.5", "--lambda", "1", "--terms", "10", "--tolerance", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn numerical_errors_exit_three() {
    // double precision cannot resolve the fourth derivative this far out
    let out = run(&["derivs", "--alpha", "0.9", "--x", "0.05", "--max-order", "4", "--precision", "double"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("derivs: numerical failure"));
}

#[test]
fn dry_run_prints_config_only() {
    for sub in [
        &["eval", "--alpha", "0.5", "--x", "1"][..],
        &["derivs", "--alpha", "0.5", "--x", "1"],
        &["bellshape", "--alpha", "0.5"],
        &["factorize", "--alpha", "0.5", "--lambda", "1"],
        &["wbs", "--n", "3"],
        &["tp-check"],
        &["conjecture"],
        &["factor-check"],
        &["sample", "--alpha", "0.5"],
    ] {
        let mut args = sub.to_vec();
        args.push("--dry-run");
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let v = json(&out);
        assert!(v.get("report").is_none());
        assert!(v["config"].is_object());
        assert_eq!(v["command"], sub[0]);
    }
}

#[test]
fn output_flag_and_env_directory() {
    let dir = scratch_dir("out");
    let file = dir.join("nested").join("r.json");
    let out = run(&["eval", "--alpha", "0.5", "--x", "1", "--output", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&file).unwrap()).unwrap();
    assert_eq!(v["command"], "eval");

    let out = bin()
        .args(["sample", "--alpha", "0.5", "--count", "5", "--format", "csv"])
        .env("BELLSHAPE_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.join("sample.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn seed_changes_samples() {
    let a = run(&["sample", "--alpha", "0.5", "--count", "4", "--seed", "1"]);
    let b = run(&["sample", "--alpha", "0.5", "--count", "4", "--seed", "2"]);
    assert_ne!(json(&a)["report"], json(&b)["report"]);
    assert_eq!(json(&a)["seed"], 1);
}

#[test]
fn subcommand_reports() {
    let v = json(&run(&["wbs", "--n", "2"]));
    assert_eq!(v["report"]["wbs_orders"], serde_json::json!([1]));
    let v = json(&run(&["tp-check", "--kernel", "stable"]));
    assert!(v["report"]["minors"]["witness"]["value"].as_f64().unwrap() < 0.0);
    let v = json(&run(&["tp-check", "--kernel", "exp-sum", "--budget", "500"]));
    assert_eq!(v["report"]["minors"]["all_nonnegative"], true);
    let v = json(&run(&["conjecture", "--family", "inv-gamma", "--n", "3"]));
    assert_eq!(v["pass"], true);
    let v = json(&run(&["factor-check", "--n", "3", "--samples", "200000"]));
    assert!(v["report"]["ks_distance"].as_f64().unwrap() < 0.01);
}
