mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::brute_threshold;
use fairlab::report::cli_main;
use fairlab::sweep::RESULTS_HEADER;
use fairlab::threshold::{ScoredSet, ThresholdSelection, PARETO_HEADER};
use fairlab::trainer::TRACE_HEADER;

fn fairlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairlab"))
        .args(args)
        .env("FAIRLAB_THREADS", "1")
        .output()
        .unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn first_line(p: &Path) -> String {
    fs::read_to_string(p).unwrap().lines().next().unwrap().to_string()
}

fn twelve() -> ScoredSet {
    ScoredSet::new(
        vec![0.91, 0.74, 0.62, 0.35, 0.18, 0.55, 0.83, 0.47, 0.29, 0.08, 0.66, 0.52],
        vec![1, 1, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0],
        vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1],
    )
    .unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli_main(["fairlab", "frobnicate"]), 1);
    assert_eq!(cli_main(["fairlab", "sweep", "--preset", "nope", "--out", "x.csv"]), 1);
    assert_eq!(cli_main(["fairlab", "threshold", "--scores", "s.csv", "--thr", "1.5"]), 1);
    assert_eq!(cli_main(["fairlab", "--help"]), 0);

    let out = fairlab(&["train", "--width", "8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--trace-out"));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = fairlab(&["threshold", "--scores", arg(&missing), "--thr", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn gen_data_train_threshold_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let all = d.join("all.csv");
    let splits = d.join("splits");
    let out = fairlab(&["gen-data", "--n-total", "400", "--seed", "3", "--out", arg(&all), "--split-dir", arg(&splits)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&all).unwrap().lines().count(), 401);
    let total: usize = ["train.csv", "val.csv", "test.csv"]
        .iter()
        .map(|f| fs::read_to_string(splits.join(f)).unwrap().lines().count() - 1)
        .sum();
    assert_eq!(total, 400);

    let trace = d.join("trace.csv");
    let model = d.join("model.json");
    let scores = d.join("scores");
    let out = fairlab(&[
        "train",
        "--train",
        arg(&splits.join("train.csv")),
        "--val",
        arg(&splits.join("val.csv")),
        "--test",
        arg(&splits.join("test.csv")),
        "--width",
        "32",
        "--lambda",
        "1.5",
        "--steps",
        "200",
        "--trace-out",
        arg(&trace),
        "--model-out",
        arg(&model),
        "--scores-dir",
        arg(&scores),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&trace), TRACE_HEADER);
    assert!(fairlab::RandomFeatureModel::load(&model).is_ok());

    let pareto = d.join("pareto.csv");
    let out = fairlab(&[
        "threshold",
        "--scores",
        arg(&scores.join("val_scores.csv")),
        "--test",
        arg(&scores.join("test_scores.csv")),
        "--thr",
        "0.05",
        "--thr",
        "0.2",
        "--out",
        arg(&pareto),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
    assert_eq!(first_line(&pareto), PARETO_HEADER);

    let svg = d.join("trace.svg");
    assert_eq!(fairlab(&["report", "--trace", arg(&trace), "--out", arg(&svg)]).status.code(), Some(0));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let svg = d.join("pareto.svg");
    assert_eq!(fairlab(&["report", "--pareto", arg(&pareto), "--out", arg(&svg)]).status.code(), Some(0));
    assert!(fs::read_to_string(&svg).unwrap().contains("</svg>"));
}

#[test]
fn threshold_command_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("val.csv");
    let set = twelve();
    set.save_csv(&path).unwrap();
    let out = fairlab(&["threshold", "--scores", arg(&path), "--thr", "0.1", "--grid", "101"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let sel: ThresholdSelection = serde_json::from_str(stdout.trim()).unwrap();
    let (t0, t1, err, gap) = brute_threshold(&set.scores, &set.labels, &set.attrs, 0.1, 101).unwrap();
    assert_eq!((sel.thresholds.tau_a0, sel.thresholds.tau_a1, sel.val_error, sel.val_fnr_gap), (t0, t1, err, gap));
}

#[test]
fn preset_sweep_and_width_report() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.csv");
    let runs = dir.path().join("runs.csv");
    let out = fairlab(&[
        "sweep",
        "--preset",
        "double_descent",
        "--widths",
        "4,32",
        "--seeds",
        "2",
        "--steps",
        "150",
        "--out",
        arg(&results),
        "--runs-out",
        arg(&runs),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&results), RESULTS_HEADER);
    assert_eq!(first_line(&runs), "width,lambda,regularizer,seed,metric,value");

    let svg = dir.path().join("r.svg");
    let out = fairlab(&["report", "--results", arg(&results), "--metric", "test_err", "--out", arg(&svg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.contains(">32<") && text.contains(">4<"));
}
