use std::path::Path;
use std::process::{Command, Output};

use fnoseg3d::data::{read_volume, write_volume, DatasetManifest, LABELS};

fn fnoseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnoseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a small dataset and returns the manifest path.
fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("spec.json");
    std::fs::write(
        &spec,
        r#"{"grid": [32, 32, 32], "samples": 6, "test_samples": 1, "seed": 4}"#,
    )
    .unwrap();
    let data = dir.join("data");
    let out = fnoseg(&["synth-gen", "--spec", s(&spec), "--out", s(&data)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    data.join("manifest.json")
}

#[test]
fn train_then_eval_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let run = dir.path().join("run");
    let out = fnoseg(&[
        "train",
        "--manifest",
        s(&manifest),
        "--epochs",
        "2",
        "--out",
        s(&run),
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["checkpoint.fnck", "history.csv", "results.json", "run_config.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,lr,train_loss,"));
    assert_eq!(history.lines().count(), 3);
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("results.json")).unwrap()).unwrap();
    assert!(results["test"]["summary"]["mean"].is_number());

    let ev = dir.path().join("eval");
    let ckpt = run.join("checkpoint.fnck");
    let out = fnoseg(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&manifest),
        "--factor",
        "2",
        "--out",
        s(&ev),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ev.join("eval.csv").exists());

    // same seed and config: identical history and results
    let again = dir.path().join("again");
    let out = fnoseg(&[
        "train",
        "--manifest",
        s(&manifest),
        "--epochs",
        "2",
        "--out",
        s(&again),
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    for f in ["history.csv", "results.json", "checkpoint.fnck"] {
        assert_eq!(
            std::fs::read(run.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn experiment_writes_robustness_table() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let run = dir.path().join("exp");
    let out = fnoseg(&[
        "experiment",
        "--manifest",
        s(&manifest),
        "--epochs",
        "1",
        "--factors",
        "1,2",
        "--variants",
        "fnoseg3d,baseline_cnn",
        "--out",
        s(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(run.join("robustness_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.lines().skip(1).all(|l| l.contains(",ok,")), "{table}");
    assert!(run.join("cells/baseline_cnn_f2/history.csv").exists());
    assert!(run.join("results.json").exists());
}

#[test]
fn non_finite_input_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let m = DatasetManifest::load(&manifest).unwrap();
    for e in &m.entries {
        let path = manifest.parent().unwrap().join(&e.path);
        let mut v = read_volume(&path).unwrap();
        v.image.data_mut()[5] = f32::NAN;
        write_volume(&v, LABELS, &path).unwrap();
    }
    let out = fnoseg(&[
        "train",
        "--manifest",
        s(&manifest),
        "--epochs",
        "1",
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_and_data_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"seed": 1, "learning_rate": 3}"#).unwrap();
    assert_eq!(code(&fnoseg(&["--config", s(&bad), "param-count"])), 2);
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(&fnoseg(&["--config", s(&bad), "param-count"])), 2);
    let missing = dir.path().join("nowhere/manifest.json");
    assert_eq!(
        code(&fnoseg(&["train", "--manifest", s(&missing), "--out", s(dir.path())])),
        3
    );
    assert_eq!(code(&fnoseg(&["train", "--out", s(dir.path())])), 2);
    let zero = fnoseg(&[
        "experiment",
        "--factors",
        "0",
        "--manifest",
        s(&missing),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&zero), 2);

    let data = dir.path().join("d");
    std::fs::create_dir_all(&data).unwrap();
    let manifest = data.join("manifest.json");
    std::fs::write(&manifest, "[]").unwrap();
    assert_eq!(
        code(&fnoseg(&["train", "--manifest", s(&manifest), "--out", s(dir.path())])),
        3
    );
}

#[test]
fn gradcheck_and_param_count_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnoseg(&["gradcheck", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.ends_with("ok")));
    assert!(dir.path().join("gradcheck.json").exists());

    let out = fnoseg(&["param-count", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0);
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("param_count.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
    assert_eq!(rows[0]["reference"], 29800);
}
