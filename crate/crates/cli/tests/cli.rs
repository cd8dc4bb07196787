use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrc")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const STATIC: &str = "scheme = \"static\"\nn_qubits = 3\nshots = 300\nseed = 2\ntask = \"binary_periodic(2, 30)\"\nnum_pred = 4\n";

#[test]
fn version_prints() {
    let out = qrc(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("qrc "));
}

#[test]
fn run_writes_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STATIC);
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = qrc(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy = "));
    }
    for name in ["features.csv", "predictions.csv", "metrics.txt", "circuit.txt", "model.txt", "config.resolved.toml"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let preds = fs::read_to_string(dir.path().join("a/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 5);
    assert_eq!(preds.lines().next(), Some("step,value"));
}

#[test]
fn incremental_sine_has_one_column_per_qubit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scheme = \"incremental\"\nn_qubits = 3\nmemory = 3\nshots = 200\ntask = \"sine(8, 30, 0)\"\nnum_pred = 2\n",
    );
    let out_dir = dir.path().join("out");
    let out = qrc(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let features = fs::read_to_string(out_dir.join("features.csv")).unwrap();
    assert_eq!(features.lines().next(), Some("t,f0,f1,f2"));
    assert_eq!(features.lines().count(), 31);
}

#[test]
fn invalid_config_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scheme = \"static\"\nn_qubits = 3\nshots = 0\ntask = \"binary_periodic(2, 30)\"\n");
    let out_dir = dir.path().join("out");
    let out = qrc(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("shots"));
    assert!(!out_dir.exists());
}

#[test]
fn warnings_go_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{STATIC}memory = 4\n"));
    let out = qrc(&["dump-circuit", &cfg, "--steps", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("memory"));
}

#[test]
fn dump_circuit_shows_tagged_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STATIC);
    let out = qrc(&["dump-circuit", &cfg, "--steps", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("t0") && text.contains("t2"));
    assert_eq!(text.matches("[P]").count(), 3);

    let inc = write_config(
        dir.path(),
        "scheme = \"incremental\"\nn_qubits = 2\nmemory = 2\ntask = \"binary_periodic(2, 10)\"\n",
    );
    let out = qrc(&["dump-circuit", &inc, "--steps", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("[P]").count(), 2, "{text}");
}
