use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparsebench::solvers::LinearModel;
use sparsebench_cli::runner::sha256_hex;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sparsebench"));
    c.env("SPARSEBENCH_LOG", "warn");
    c
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/demo.json")
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn sparsebench");
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Data rows of a results.csv, the schema comment and header excluded.
fn result_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let csv = dir.join("synth.csv");
    run_ok(bin().arg("synth").args(extra).arg("-o").arg(&csv));
    csv
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn demo_run_covers_the_full_grid() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("demo");
    run_ok(bin().arg("run").arg(demo_config()).arg("--output").arg(&out));
    let rows = result_rows(&out.join("results.csv"));
    assert_eq!(rows.len(), 20);
    for name in ["results.json", "top_features.csv", "group_stats.csv", "manifest.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    assert_eq!(fs::read_dir(out.join("cv_tables")).unwrap().count(), 10);
    assert_eq!(fs::read_dir(out.join("curves")).unwrap().count(), 20);

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "sparsebench-manifest/1");
    for entry in manifest["artifacts"].as_array().unwrap() {
        let bytes = fs::read(out.join(entry["path"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(entry["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
}

#[test]
fn single_cell_config_yields_one_row() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path(), &["--samples", "40", "--features", "30", "--seed", "3"]);
    let config = write_config(
        tmp.path(),
        &format!(
            r#"{{
  "data": {{ "csv": {{ "paths": [{:?}] }} }},
  "modalities": [{{ "name": "all", "all": true }}],
  "classifiers": [2],
  "split": {{ "repetitions": 3 }},
  "cv": {{ "folds": 3 }}
}}"#,
            csv.file_name().unwrap()
        ),
    );
    run_ok(bin().arg("run").arg(&config).args(["--jobs", "2", "--seed", "9"]));
    let out = tmp.path().join("results");
    assert_eq!(result_rows(&out.join("results.csv")).len(), 1);
    assert!(out.join("top_features.csv").is_file());
    assert!(!out.join("curves").exists());
    assert!(!out.join("group_stats.csv").exists());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["split"], 9);
    assert_eq!(manifest["seeds"]["cv"], 9);
}

#[test]
fn fit_then_predict_reproduces_training_accuracy() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path(), &["--samples", "50", "--features", "20", "--seed", "11"]);
    let labels: Vec<String> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect();
    for (classifier, lambda) in [("1", None), ("2", Some("0.01")), ("3", None), ("4", None)] {
        let model_path = tmp.path().join(format!("model{classifier}.json"));
        let mut fit = bin();
        fit.arg("fit").arg("--data").arg(&csv).args(["--classifier", classifier]);
        if let Some(l) = lambda {
            fit.args(["--lambda", l]);
        }
        run_ok(fit.arg("-o").arg(&model_path));
        let model = LinearModel::load(&model_path).unwrap();

        let out = run_ok(
            bin()
                .arg("predict")
                .arg("--model")
                .arg(&model_path)
                .arg("--data")
                .arg(&csv)
                .args(["--label-column", "label"]),
        );
        let text = String::from_utf8(out.stdout).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        let lr = classifier == "1" || classifier == "2";
        assert_eq!(
            header,
            if lr { "id,decision_value,probability,predicted_label" } else { "id,decision_value,predicted_label" }
        );
        let predicted: Vec<String> = lines.map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
        let hits = predicted.iter().zip(&labels).filter(|(p, y)| p == y).count();
        assert_eq!(hits as f64 / labels.len() as f64, model.diagnostics.training_accuracy);
    }
}

#[test]
fn predict_writes_files_and_accepts_unlabeled_input() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path(), &["--samples", "30", "--features", "10", "--seed", "4"]);
    let model = tmp.path().join("m.json");
    run_ok(bin().arg("fit").arg("--data").arg(&csv).args(["--classifier", "1", "-o"]).arg(&model));
    let unlabeled = tmp.path().join("x.csv");
    let text: String = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(|l| format!("{}\n", &l[..l.rfind(',').unwrap()]))
        .collect();
    fs::write(&unlabeled, text).unwrap();
    let preds = tmp.path().join("p.csv");
    run_ok(bin().arg("predict").arg("--model").arg(&model).arg("--data").arg(&unlabeled).arg("-o").arg(&preds));
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 31);
}

#[test]
fn validate_accepts_the_demo() {
    let out = run_ok(bin().arg("validate").arg(demo_config()));
    let stderr = String::from_utf8(out.stderr).unwrap();
    for (name, size) in [("CCA", 20), ("ROI-NP", 180), ("ROI-P", 30), ("CCAR-NP", 200), ("CCAR-P", 50)] {
        assert!(
            stderr.lines().any(|l| l.split_whitespace().collect::<Vec<_>>()[..2] == [name, &size.to_string()]),
            "{name} {size} not in:\n{stderr}"
        );
    }
    assert!(out.stdout.is_empty());
}

#[test]
fn config_errors_exit_2_and_data_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    let csv = synth(tmp.path(), &["--samples", "20", "--features", "5"]);
    let name = csv.file_name().unwrap().to_str().unwrap().to_string();
    let cases = [
        ("{ \"data\": ", 2),
        (
            r#"{"data": {"csv": {"paths": ["synth.csv"]}}, "modalities": [{"name": "a", "all": true}], "bogus": 1}"#,
            2,
        ),
        (r#"{"data": {"csv": {"paths": ["nowhere.csv"]}}, "modalities": [{"name": "a", "all": true}]}"#, 2),
        (
            r#"{"data": {"csv": {"paths": ["synth.csv"]}}, "modalities": [{"name": "a", "all": true}], "classifiers": [7]}"#,
            2,
        ),
        (
            r#"{"data": {"csv": {"paths": ["synth.csv"]}}, "modalities": [{"name": "a", "features": ["f0", "nope"]}]}"#,
            3,
        ),
        (
            r#"{"data": {"csv": {"paths": ["synth.csv"], "label_column": "missing"}}, "modalities": [{"name": "a", "all": true}]}"#,
            3,
        ),
    ];
    for (body, code) in cases {
        let config = write_config(tmp.path(), &body.replace("synth.csv", &name));
        for sub in ["validate", "run"] {
            let out = bin().arg(sub).arg(&config).output().unwrap();
            assert_eq!(
                out.status.code(),
                Some(code),
                "{sub} on {body}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
    let out = bin().arg("validate").arg(write_config(tmp.path(), "{\n  \"modalities\": [],\n  \"oops\" 1\n}\n")).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("config.json:3:"));
}

#[test]
fn synth_matches_the_golden_hashes() {
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/synth.sha256")).unwrap();
    let invocation = golden.lines().next().unwrap().trim_start_matches("# sparsebench ");
    let tmp = TempDir::new().unwrap();
    run_ok(bin().current_dir(tmp.path()).args(invocation.split_whitespace()));
    for line in golden.lines().filter(|l| !l.starts_with('#')) {
        let (hash, file) = line.split_once("  ").unwrap();
        assert_eq!(sha256_hex(&fs::read(tmp.path().join(file)).unwrap()), hash, "{file}");
    }
}
