use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparse_evo::metrics::{parse_metrics, METRICS_HEADER};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sparse-evo"));
    cmd.env_remove("SPARSE_EVO_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small run: 200 generated samples, two hidden layers of 24 units.
fn train_small(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let config = dir.join("small.json");
    std::fs::write(
        &config,
        r#"{"preset": "madelon", "hidden_dims": [24, 24], "epochs": 9, "eta": 0.02, "generator_samples": 200,
            "test_samples": 80, "batch_size": 20, "checkpoints": [0, 2, 5, 9]}"#,
    )
    .unwrap();
    let out = dir.join(name);
    let mut args = vec!["train", "--config", s(&config), "--out", s(&out), "--quiet"];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn gen_data_writes_csv_and_roles() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("sub/b.csv");
    ok(&["gen-data", "--preset", "madelon-like", "--samples", "2600", "--seed", "4", "--out", s(&a)]);
    ok(&["gen-data", "--samples", "2600", "--seed", "4", "--out", s(&b)]);
    let text = std::fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2601);
    assert!(lines.iter().all(|l| l.split(',').count() == 501));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["roles"].as_array().unwrap().len(), 500);
    assert!(!run(&["gen-data", "--preset", "mnist", "--out", s(&a)]).status.success());
}

#[test]
fn train_writes_a_self_describing_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = train_small(dir.path(), "run", &["--policy", "CoDACoRSET", "--seed", "3"]);
    for f in [
        "run_config.json",
        "metrics.csv",
        "rewiring.csv",
        "timing.csv",
        "model.json",
        "test.csv",
        "test.meta.json",
        "model_epoch0.json",
        "model_epoch2.json",
        "model_epoch5.json",
        "model_epoch9.json",
    ] {
        assert!(run_dir.join(f).exists(), "{f} missing");
    }
    let echoed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("run_config.json")).unwrap())
            .unwrap();
    // flags beat the file, the file beats the preset, the preset fills the rest
    assert_eq!(echoed["policy"], "CoDACoRSET");
    assert_eq!(echoed["seed"], 3);
    assert_eq!(echoed["hidden_dims"], serde_json::json!([24, 24]));
    assert_eq!(echoed["eta"], 0.02);
    assert_eq!(echoed["dropout_rate"], 0.3);

    let metrics = std::fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with(&format!("{METRICS_HEADER}\n")));
    let rows = parse_metrics(&metrics).unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.windows(2).all(|w| w[0].2 == w[1].2));
    let rewiring = std::fs::read_to_string(run_dir.join("rewiring.csv")).unwrap();
    assert_eq!(rewiring.lines().count(), 1 + 9 * 3);

    // evaluation of the saved model reproduces the logged accuracy
    let printed = ok(&[
        "evaluate",
        "--model",
        s(&run_dir.join("model.json")),
        "--data",
        s(&run_dir.join("test.csv")),
    ]);
    let logged = rows.last().unwrap().1;
    assert_eq!(printed.trim(), format!("{logged:.4}"));

    // rerunning the same configuration reproduces metrics.csv byte for byte
    let again = train_small(dir.path(), "again", &["--policy", "CoDACoRSET", "--seed", "3"]);
    assert_eq!(
        std::fs::read(run_dir.join("metrics.csv")).unwrap(),
        std::fs::read(again.join("metrics.csv")).unwrap()
    );
    // and so does the echoed config when used as the config file
    let replay = dir.path().join("replay");
    ok(&[
        "train",
        "--config",
        s(&run_dir.join("run_config.json")),
        "--out",
        s(&replay),
        "--quiet",
    ]);
    assert_eq!(
        std::fs::read(run_dir.join("metrics.csv")).unwrap(),
        std::fs::read(replay.join("metrics.csv")).unwrap()
    );
}

#[test]
fn analyze_modes_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = train_small(dir.path(), "run", &["--policy", "CoDASET"]);
    let test = run_dir.join("test.csv");
    let out = dir.path().join("analysis");
    let model = run_dir.join("model.json");

    ok(&["analyze", "--mode", "degrees", "--model", s(&model), "--data", s(&test), "--out", s(&out)]);
    let degrees = std::fs::read_to_string(out.join("degrees.csv")).unwrap();
    assert_eq!(degrees.lines().count(), 1 + 500);
    assert!(degrees.lines().nth(1).unwrap().split(',').nth(2).unwrap().len() > 1);
    let hist = std::fs::read_to_string(out.join("histogram.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 500);

    ok(&["analyze", "--mode", "ablation", "--model", s(&model), "--data", s(&test), "--out", s(&out)]);
    let asc = std::fs::read_to_string(out.join("ablation_ascending.csv")).unwrap();
    let first = asc.lines().nth(1).unwrap();
    let baseline = ok(&["evaluate", "--model", s(&model), "--data", s(&test)]);
    let base: f64 = baseline.trim().parse().unwrap();
    let (removed, acc) = first.split_once(',').unwrap();
    assert_eq!(removed, "0");
    assert!((acc.parse::<f64>().unwrap() - base).abs() < 5e-5);
    assert!(out.join("ablation_descending.csv").exists());

    let pattern = run_dir.join("model_epoch*.json");
    let snaps = dir.path().join("snaps");
    let listed = ok(&[
        "analyze", "--mode", "snapshots", "--model", s(&pattern), "--data", s(&test), "--out", s(&snaps),
    ]);
    assert_eq!(listed.lines().count(), 4);
    for epoch in [0, 2, 5, 9] {
        let curve = std::fs::read_to_string(snaps.join(format!("snapshot_epoch{epoch}.csv"))).unwrap();
        assert_eq!(curve.lines().count(), 1 + 26);
    }

    ok(&[
        "analyze", "--mode", "cosine", "--model", s(&model), "--data", s(&test), "--out", s(&out),
        "--layer", "1",
    ]);
    let cos = std::fs::read_to_string(out.join("cosine_layer1.csv")).unwrap();
    assert_eq!(cos.lines().count(), 1 + 24);
    assert_eq!(cos.lines().nth(1).unwrap().split(',').count(), 1 + 24);

    let multi = run(&[
        "analyze", "--mode", "degrees", "--model", s(&pattern), "--data", s(&test), "--out", s(&out),
    ]);
    assert!(!multi.status.success());
}

#[test]
fn untrained_model_guesses_on_balanced_data() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = train_small(dir.path(), "run", &["--epochs", "1", "--checkpoints", "0"]);
    // 600 balanced samples with labels independent of the features
    let data = dir.path().join("balanced.csv");
    let mut text = (0..500).map(|j| format!("f{j},")).collect::<String>() + "label\n";
    for i in 0..600u64 {
        for j in 0..500u64 {
            let x = ((i * 7919 + j * 104729) % 1000) as f64 / 250.0 - 2.0;
            text.push_str(&format!("{x},"));
        }
        text.push_str(&format!("{}\n", ((i * 2654435761) >> 7) % 2));
    }
    std::fs::write(&data, text).unwrap();
    let labels_one = std::fs::read_to_string(&data)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .count();
    assert!((270..=330).contains(&labels_one));
    let printed = ok(&["evaluate", "--model", s(&run_dir.join("model_epoch0.json")), "--data", s(&data)]);
    let acc: f64 = printed.trim().parse().unwrap();
    assert!((0.4..=0.6).contains(&acc), "accuracy {acc}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let bad = run(&["train", "--preset", "madelon", "--zeta", "1.5", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("zeta"));
    let bad = run(&["train", "--preset", "madelon", "--policy", "NOPE"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = run(&["train", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"learning_rate": 0.1}"#).unwrap();
    assert!(!run(&["train", "--config", s(&cfg)]).status.success());
}

#[test]
fn divergence_reports_the_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train", "--preset", "madelon", "--hidden", "8", "--samples", "120", "--test-samples", "20",
        "--epochs", "3", "--batch-size", "10", "--eta", "1e300", "--momentum", "0", "--out", s(&dir.path().join("d")),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("diverged in epoch 1"), "{err}");
}

#[test]
fn evaluate_rejects_width_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = train_small(dir.path(), "run", &["--epochs", "1"]);
    let data = dir.path().join("narrow.csv");
    std::fs::write(&data, "a,b,label\n1,2,0\n3,4,1\n").unwrap();
    let out = run(&["evaluate", "--model", s(&run_dir.join("model.json")), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
}
