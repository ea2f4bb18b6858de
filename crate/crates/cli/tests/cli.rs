use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pyramidnet"))
        .args(args)
        .current_dir(dir)
        .env_remove("PYRAMIDNET_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn final_accuracy(o: &Output) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("final test accuracy: "))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn train_synthetic_writes_metrics_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--data", "synthetic", "--epochs", "3", "--save-model", "net.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(final_accuracy(&o) >= 0.95);
    let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,minibatch,train_loss,test_accuracy,wall_ms"));
    // 5000 samples / 50 per minibatch, 3 epochs
    assert_eq!(lines.count(), 300);
    assert!(fs::read_to_string(dir.path().join("net.json")).unwrap().contains("angles"));
}

#[test]
fn svb_run_is_comparable() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["train", "--arch", "16,4", "--epochs", "5", "--train-size", "2000", "--test-size", "500"];
    let pyr = run(&[&common[..], &["--metrics", "pyr.csv"]].concat(), dir.path());
    let svb = run(&[&common[..], &["--updater", "svb", "--metrics", "svb.csv"]].concat(), dir.path());
    assert_eq!(code(&pyr), 0, "{}", stderr(&pyr));
    assert_eq!(code(&svb), 0, "{}", stderr(&svb));
    let (a, b) = (final_accuracy(&pyr), final_accuracy(&svb));
    assert!(a >= 0.9 && b >= 0.9 && (a - b).abs() <= 0.03, "{a} {b}");
    let header = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("pyr.csv"), header("svb.csv"));
}

#[test]
fn same_seed_same_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["train", "--epochs", "2", "--seed", "3", "--train-size", "400", "--metrics", out];
    assert_eq!(code(&run(&args("a.csv"), dir.path())), 0);
    assert_eq!(code(&run(&args("b.csv"), dir.path())), 0);
    let strip = |f: &str| -> Vec<String> {
        fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip("a.csv"), strip("b.csv"));
}

#[test]
fn zero_learning_rate_leaves_loss_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--learning-rate", "0", "--epochs", "2", "--train-size", "200", "--batch-size", "200"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let acc: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(acc.len(), 2);
    assert_eq!(acc[0], acc[1]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), r#"{"arch": [4, 2], "epochs": 4, "train_size": 100, "batch_size": 50}"#).unwrap();
    let o = run(&["--config", "run.json", "train", "--epochs", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = fs::read_to_string(dir.path().join("metrics.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"epoch": 3}"#).unwrap();
    for args in [
        &["train", "--config", "bad.json"][..],
        &["train", "--arch", "2,4"],
        &["train", "--arch", "4,2", "--pca", "8"],
        &["train", "--updater", "adam"],
        &["train", "--learning-rate", "-1"],
        &["qsim-verify", "--n-max", "13"],
        &["tomo-demo", "--shots", "0"],
        &["train", "--bogus-flag"],
    ] {
        let o = run(args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_mnist_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--data", "mnist"], dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("PYRAMIDNET_DATA_DIR"));
    let o = run(&["train", "--data", "mnist", "--data-dir", "."], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn qsim_verify_passes_and_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["qsim-verify", "--trials", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 9 * 5);
    assert!(out.lines().all(|l| l.contains("=pass:")), "{out}");
    assert!(out.contains("unary_equivalence_n10=pass:"));
}

#[test]
fn qsim_verify_fault_injection_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["qsim-verify", "--n-max", "4", "--inject-fault"], dir.path());
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("unary_equivalence_n2=fail:"));
}

#[test]
fn tomo_demo_analytic_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tomo-demo", "--shots", "analytic", "--max-error", "1e-10"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("discard_fraction=0.0000"));
}

#[test]
fn tomo_demo_prints_mitigation_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tomo-demo", "--noise-p", "0.01", "--seed", "2"], dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for tag in ["pairwise mitigation=off", "pairwise mitigation=on", "ancilla mitigation=off", "ancilla mitigation=on"] {
        assert!(out.contains(tag), "{out}");
    }
    let o = run(&["tomo-demo", "--shots", "100000", "--max-error", "0.05"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn bench_scaling_writes_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bench-scaling", "--sizes", "8,16,32", "--repeats", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,pyramid_ms,svb_ms");
    assert_eq!(lines.len(), 4);
    assert!(stdout(&o).contains("ratio trend"));
}

#[test]
fn export_zero_layer_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["export-matrix", "--zero", "--n", "4"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    for (r, line) in csv.lines().enumerate() {
        let row: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let expected: Vec<f64> = (0..4).map(|c| if c == r { 1.0 } else { 0.0 }).collect();
        assert_eq!(row, expected);
    }
}

#[test]
fn export_trained_layer_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--arch", "6,6,2", "--epochs", "1", "--save-model", "m.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["export-matrix", "--model", "m.json", "--layer", "0", "--out", "w.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let residual: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("roundtrip residual="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual <= 1e-8);
    let o = run(&["export-matrix", "--import", "w.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("angles.json").exists());
}

#[test]
fn export_import_reports_sign_mask() {
    let dir = tempfile::tempdir().unwrap();
    // a reflection: det = -1
    fs::write(dir.path().join("r.csv"), "0,1,0\n1,0,0\n0,0,1\n").unwrap();
    let o = run(&["export-matrix", "--import", "r.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("sign_mask=1,1,-1"), "{out}");
    assert!(out.contains("flipped_wires=[2]"));

    fs::write(dir.path().join("skew.csv"), "1,1\n0,1\n").unwrap();
    assert_eq!(code(&run(&["export-matrix", "--import", "skew.csv"], dir.path())), 3);
    assert_eq!(code(&run(&["export-matrix", "--import", "missing.csv"], dir.path())), 3);
}
