//! Exit codes, file outputs, and table shape of the command-line interface.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::synth_dataset;
use parsmo::SparseSample;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parsmo"))
}

fn write_dataset(path: &Path, samples: &[SparseSample]) {
    let mut text = String::new();
    for s in samples {
        let label = if s.label > 0.0 { "+1" } else { "-1" };
        text.push_str(label);
        for (&i, &v) in s.indices.iter().zip(&s.values) {
            text.push_str(&format!(" {i}:{v}"));
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn train_writes_model_and_report_and_predict_scores_it() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_dataset(&data, &synth_dataset(80, 6, 4, 2.0, 0.5, 3));
    let model = dir.path().join("out.model");
    let report = dir.path().join("report.json");

    let status = bin()
        .args(["train", "--data"])
        .arg(&data)
        .args(["--c", "1", "--sigma2", "1", "--workers", "2"])
        .arg("--model-out")
        .arg(&model)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(model.exists());

    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["converged"], serde_json::Value::Bool(true));
    assert_eq!(parsed["heuristic"], "original");
    assert!(parsed["n_support"].as_u64().unwrap() > 0);

    // classify the training data with the saved model
    let preds = dir.path().join("preds.txt");
    let output = bin()
        .args(["predict", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&preds)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(
        stdout.contains("accuracy 1.0000"),
        "expected perfect separable accuracy, got: {stdout}"
    );
    let lines = fs::read_to_string(&preds).unwrap();
    assert_eq!(lines.lines().count(), 80);
    assert!(lines.lines().all(|l| l == "+1" || l == "-1"));
}

#[test]
fn bogus_heuristic_exits_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_dataset(&data, &synth_dataset(10, 4, 2, 2.0, 0.5, 4));
    let status = bin()
        .args(["train", "--data"])
        .arg(&data)
        .args(["--c", "1", "--sigma2", "1", "--heuristic", "bogus"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn negative_c_exits_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_dataset(&data, &synth_dataset(10, 4, 2, 2.0, 0.5, 4));
    let status = bin()
        .args(["train", "--data"])
        .arg(&data)
        .args(["--c", "-1", "--sigma2", "1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn missing_files_exit_io_error() {
    let status = bin()
        .args([
            "predict",
            "--model",
            "/nonexistent/m.model",
            "--data",
            "/nonexistent/d.svm",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let status = bin()
        .args([
            "train",
            "--data",
            "/nonexistent/d.svm",
            "--c",
            "1",
            "--sigma2",
            "1",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unlabeled_input_omits_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_dataset(&data, &synth_dataset(40, 5, 3, 2.0, 0.5, 9));
    let model = dir.path().join("m.model");
    let status = bin()
        .args(["train", "--data"])
        .arg(&data)
        .args(["--c", "1", "--sigma2", "1"])
        .arg("--model-out")
        .arg(&model)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // all-zero labels are the unlabeled placeholder
    let unlabeled = dir.path().join("unlabeled.svm");
    let text: String = synth_dataset(10, 5, 3, 2.0, 0.5, 10)
        .iter()
        .map(|s| {
            let feats: Vec<String> = s
                .indices
                .iter()
                .zip(&s.values)
                .map(|(i, v)| format!("{i}:{v}"))
                .collect();
            format!("0 {}\n", feats.join(" "))
        })
        .collect();
    fs::write(&unlabeled, text).unwrap();

    let output = bin()
        .args(["predict", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&unlabeled)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(!stdout.contains("accuracy"));
    assert_eq!(stdout.lines().count(), 10); // predictions only
}

#[test]
fn bench_emits_full_grid_and_equivalence_passes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_dataset(&data, &synth_dataset(60, 6, 4, 2.0, 0.8, 21));
    let output = bin()
        .args(["bench", "--data"])
        .arg(&data)
        .args([
            "--c",
            "1",
            "--sigma2",
            "1",
            "--heuristics",
            "original,multi5pc",
            "--workers",
            "1,4",
            "--check-equivalence",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("original") || l.starts_with("multi5pc"))
        .collect();
    assert_eq!(rows.len(), 4, "expected 4 table rows:\n{stdout}");
    assert!(stdout.contains("equivalence check passed"));
}

#[test]
fn train_nonconvergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_dataset(&data, &synth_dataset(50, 5, 3, 2.0, 1.0, 13));
    let status = bin()
        .args(["train", "--data"])
        .arg(&data)
        .args(["--c", "8", "--sigma2", "2", "--max-iter", "2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn bench_marks_nonconvergent_cells() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_dataset(&data, &synth_dataset(60, 6, 4, 2.0, 1.2, 22));
    // an absurdly small iteration cap forces non-convergence
    let output = bin()
        .args(["bench", "--data"])
        .arg(&data)
        .args([
            "--c",
            "8",
            "--sigma2",
            "1",
            "--heuristics",
            "original",
            "--workers",
            "1",
            "--max-iter",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("FAILED"));
}
