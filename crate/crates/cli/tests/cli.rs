use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgf-clt")).args(args).output().expect("spawn pgf-clt")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn num(v: &Value) -> f64 {
    v.as_str().expect("decimal string").parse().unwrap()
}

#[test]
fn analyze_fair_coin() {
    let v = json(&run(&["analyze", "--coeffs", "[0.5,0.5]"]));
    assert!((num(&v["D"]) - 0.341345).abs() < 1e-6);
    assert_eq!(num(&v["delta_sector"]), std::f64::consts::PI);
    assert_eq!(num(&v["delta_ball"]), 2.0);
}

#[test]
fn analyze_batch_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.json");
    std::fs::write(&path, r#"[[0.5,0.5], {"coeffs": ["0.25","0.5","0.25"]}, {"probs": [0.5, 0.5], "span": 2}]"#).unwrap();
    let v = json(&run(&["analyze", "--input", path.to_str().unwrap()]));
    let items = v.as_array().unwrap();
    assert_eq!(items.len(), 3);
    // span 2 does not change the distance in span units
    assert_eq!(items[0]["D"], items[2]["D"]);
}

#[test]
fn csv_output_has_header() {
    let out = run(&["--format", "csv", "analyze", "--coeffs", "[0.5,0.5]"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,delta_ball,delta_sector,sigma,D,ratio_sector,ratio_ball");
    assert_eq!(lines.count(), 1);
}

#[test]
fn construct_sector_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sector.json");
    let out = run(&["--out", path.to_str().unwrap(), "construct", "sector", "--sigma", "5", "--delta", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let r: pgf_clt::ConstructionResult = serde_json::from_str(&text).unwrap();
    assert!((r.achieved_sigma - 5.0).abs() < 1e-6);
    assert!(r.achieved_delta >= 0.5 - 1e-9);
    assert_eq!(serde_json::to_string_pretty(&r).unwrap() + "\n", text);
}

#[test]
fn roots_of_binomial_square() {
    let v = json(&run(&["roots", "--coeffs", "[0.25,0.5,0.25]"]));
    let roots = v["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 1);
    assert_eq!(roots[0][2], 2);
    assert!((num(&roots[0][0]) + 1.0).abs() < 1e-12);
}

#[test]
fn brownian_sector_respects_bound() {
    let v = json(&run(&["brownian", "sector", "--delta", "0.5", "--logRr", "1", "--samples", "4000", "--seed", "3"]));
    let p = num(&v["estimate"]["p_hat"]);
    let se = num(&v["estimate"]["stderr"]);
    let bound = num(&v["bound"]);
    assert!(p <= bound + 3.0 * se, "{p} > {bound} + 3 * {se}");
}

#[test]
fn stochastic_commands_need_a_seed() {
    let out = run(&["brownian", "square", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    assert_eq!(run(&["verify", "negcos"]).status.code(), Some(1));
}

#[test]
fn malformed_input_names_the_problem() {
    let out = run(&["analyze", "--coeffs", r#"{"cofs": [1]}"#]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coeffs"));

    let out = run(&["analyze", "--coeffs", "[0.5, 0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed JSON"));

    let out = run(&["analyze", "--coeffs", "[0.5, -0.5]"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_rejected() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_worker_count_is_a_precondition_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_pgf-clt"))
        .env("PGFCLT_WORKERS", "many")
        .args(["analyze", "--coeffs", "[0.5,0.5]"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_is_byte_identical_across_runs_and_workers() {
    let args = ["brownian", "square", "--y", "0.3", "--samples", "3000", "--seed", "11"];
    let a = run(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_pgf-clt")).env("PGFCLT_WORKERS", "1").args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let args = ["project", "--random-dim", "2", "--forms", "3", "--seed", "5"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn project_reports_every_small_direction() {
    let v = json(&run(&["project", "--random-dim", "2", "--forms", "3", "--seed", "5"]));
    let dirs = v["directions"].as_array().unwrap();
    assert_eq!(dirs.len(), 15);
    assert!(dirs.iter().all(|d| d["sector_pass"] == true));
    assert_eq!(v["stable"], true);
}

#[test]
fn project_rejects_wrong_length_direction() {
    let out = run(&["project", "--random-dim", "2", "--seed", "5", "--v", "1,2,3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_suites_pass() {
    for suite in ["cumulant-oracle", "weak-positivity", "projection-sector", "negcos"] {
        let v = json(&run(&["verify", suite, "--seed", "1", "--cases", "5"]));
        assert_eq!(v["failures"], 0, "{suite}");
        assert_eq!(v["suite"], suite);
    }
}
