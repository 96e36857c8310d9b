use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn sing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fit_iris(out: &Path) -> Output {
    let path = data("iris.data");
    sing(&[
        "fit",
        "--dataset",
        "iris",
        "--data",
        path.to_str().unwrap(),
        "--seed",
        "2",
        "--output-dir",
        out.to_str().unwrap(),
    ])
}

#[test]
fn missing_data_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.data");
    let out = sing(&[
        "fit",
        "--dataset",
        "iris",
        "--data",
        missing.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nowhere.data"), "{stderr}");
}

#[test]
fn invalid_optimizer_settings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = sing(&[
        "most-demo",
        "--tolerance",
        "0",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_writes_outputs_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = fit_iris(a.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(fit_iris(b.path()).status.success());
    for name in [
        "iris-seed2.model",
        "iris-seed2-fold-I.csv",
        "iris-seed2-fold-II.csv",
        "iris-seed2-results.csv",
        "iris-seed2-results.txt",
        "iris-seed2-timings.csv",
    ] {
        let left = fs::read(a.path().join(name)).unwrap_or_else(|_| panic!("{name} missing"));
        assert!(!left.is_empty(), "{name} empty");
        if name.ends_with("timings.csv") {
            continue;
        }
        let right = fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between runs");
    }
    let results = fs::read_to_string(a.path().join("iris-seed2-results.csv")).unwrap();
    let header = results.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("method,seed,teaching_accuracy,test_accuracy"));
    assert!(results.lines().any(|l| l.starts_with("sing,2,")));
}

#[test]
fn eval_replays_fitted_model() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fit_iris(dir.path()).status.success());
    let model = dir.path().join("iris-seed2.model");
    let path = data("iris.data");
    let out = sing(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        "iris",
        "--data",
        path.to_str().unwrap(),
        "--seed",
        "2",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let results = fs::read_to_string(dir.path().join("iris-seed2-results.csv")).unwrap();
    let row: Vec<&str> = results
        .lines()
        .find(|l| l.starts_with("sing,"))
        .unwrap()
        .split(',')
        .collect();
    let fitted_test = row[3];
    let eval = fs::read_to_string(dir.path().join("iris-seed2-eval.csv")).unwrap();
    let line = eval.lines().find(|l| l.contains("accuracy=")).unwrap();
    assert!(line.contains(&format!("accuracy={fitted_test} ")), "{line} vs {fitted_test}");
    let rows = eval.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 30);
}

#[test]
fn eval_rejects_model_for_other_dataset() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fit_iris(dir.path()).status.success());
    let model = dir.path().join("iris-seed2.model");
    let path = data("car.data");
    let out = sing(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        "car",
        "--data",
        path.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn most_demo_meets_oracle_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = sing(&["most-demo", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = fs::read_to_string(dir.path().join("most-demo.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.contains(",true,")).count(), 8);
    assert!(dir.path().join("most-rastrigin_2d.csv").exists());
}

#[test]
fn most_demo_runs_without_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = sing(&[
        "most-demo",
        "--divisions",
        "1",
        "--no-initial-scan",
        "--mc-samples",
        "20",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let summary = fs::read_to_string(dir.path().join("most-demo.csv")).unwrap();
    assert!(summary.contains("initial_scan=false"));
    assert_eq!(summary.lines().filter(|l| !l.starts_with('#')).count(), 1 + 8);
}
