use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debias-clr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = bin(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL_RUN: &str = r#"
attribute = "gender"
fractions = [0.5, 0.75]
classifiers = ["logistic_regression", "knn"]
output_dir = "run"

[input]
kind = "synthetic"
n_records = 200
dim = 16
sensitive_frac = 0.125
bias_shift = 0.8
clinical_factors = 2

[train]
epochs = 2
batch_size = 64
hidden = 16
representation = 8
head_hidden = 8
projection = 4
"#;

#[test]
fn stepwise_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "synth",
            "--seed",
            "3",
            "--n-records",
            "200",
            "--dim",
            "16",
            "--bias-shift",
            "0.8",
            "--out",
            "t.csv",
        ],
        d,
    );
    assert!(d.join("t.csv.manifest.json").exists());
    ok(
        &[
            "select",
            "--input",
            "t.csv",
            "--attribute",
            "gender",
            "--balance",
            "--out",
            "p.json",
        ],
        d,
    );
    ok(
        &[
            "train",
            "--input",
            "t.csv",
            "--profile",
            "p.json",
            "--epochs",
            "2",
            "--batch-size",
            "32",
            "--seed",
            "1",
            "--out",
            "e.dclr",
            "--report",
            "r.json",
        ],
        d,
    );
    ok(
        &[
            "embed",
            "--input",
            "t.csv",
            "--checkpoint",
            "e.dclr",
            "--out",
            "h.csv",
        ],
        d,
    );
    let h = fs::read_to_string(d.join("h.csv")).unwrap();
    assert_eq!(h.lines().count(), 201);
    assert!(h.starts_with("record_id,h_0,"));
    let audit = ok(
        &[
            "audit",
            "--input",
            "t.csv",
            "--embeddings",
            "h.csv",
            "--attribute",
            "gender",
            "--out",
            "a.json",
        ],
        d,
    );
    assert!(audit.contains("Diagnostic codes"));
    let eval = ok(
        &[
            "eval",
            "--input",
            "t.csv",
            "--embeddings",
            "h.csv",
            "--attribute",
            "gender",
            "--task",
            "probe",
            "--classifiers",
            "logistic_regression,knn",
        ],
        d,
    );
    assert!(eval.contains("LR") && eval.contains("kNN"));
}

#[test]
fn run_and_report_rerender_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("exp.toml"), SMALL_RUN).unwrap();
    ok(&["run", "--config", "exp.toml", "--seed", "9"], d);
    let reports = d.join("run/reports");
    let table = fs::read(reports.join("table2_sc_weat_seed9.txt")).unwrap();
    fs::remove_file(reports.join("table2_sc_weat_seed9.txt")).unwrap();
    ok(
        &["report", "--results", "run/reports/results_seed9.json"],
        d,
    );
    assert_eq!(
        fs::read(reports.join("table2_sc_weat_seed9.txt")).unwrap(),
        table
    );
    let json = fs::read(reports.join("results_seed9.json")).unwrap();
    ok(
        &[
            "report",
            "--results",
            "run/reports/results_seed9.json",
            "--structured",
        ],
        d,
    );
    assert_eq!(fs::read(reports.join("results_seed9.json")).unwrap(), json);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(bin(&["run"], d).status.code(), Some(1), "missing --seed");
    assert_eq!(
        bin(&["run", "--seed", "1", "--fractions", "1.5"], d)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        bin(&["run", "--seed", "1", "--input", "missing.csv"], d)
            .status
            .code(),
        Some(3)
    );
    assert_eq!(bin(&["--help"], d).status.code(), Some(0));
    ok(
        &["synth", "--n-records", "60", "--dim", "8", "--out", "t.csv"],
        d,
    );
    let smote_too_big = bin(
        &[
            "eval",
            "--input",
            "t.csv",
            "--attribute",
            "ethnicity",
            "--task",
            "probe",
            "--smote-k",
            "100",
        ],
        d,
    );
    assert_eq!(
        smote_too_big.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&smote_too_big.stderr)
    );
}
