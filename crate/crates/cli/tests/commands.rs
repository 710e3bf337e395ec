use std::fs;
use std::path::Path;
use std::process::Command;

use hypkit_cli::commands::common::{CHECKPOINT_FILE, METRICS_FILE};
use hypkit_cli::commands::{embed, gnn, lora, toy};
use hypkit_cli::config::{RunConfig, Task};

fn config(task: Task, pairs: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::defaults(task);
    for (k, v) in pairs {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn embed_recovers_a_path_and_rejects_disconnected_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "path.tsv", "0\t1\n1\t2\n");
    let cfg = config(
        Task::Embed,
        &[("dataset", &path), ("dim", "2"), ("epochs", "200")],
    );
    let o = embed::run(&cfg, &dir.path().join("run")).unwrap();
    assert_eq!(o.map, 1.0);
    assert!(o.loss.is_finite() && o.curvature == Some(-1.0));
    assert!(dir.path().join("run").join(CHECKPOINT_FILE).exists());
    let metrics = fs::read_to_string(dir.path().join("run").join(METRICS_FILE)).unwrap();
    assert!(
        metrics.lines().any(|l| l.starts_with("200,train,map,")),
        "{metrics}"
    );

    let split = write(dir.path(), "split.tsv", "0\t1\n2\t3\n");
    let cfg = config(Task::Embed, &[("dataset", &split), ("epochs", "5")]);
    assert!(embed::run(&cfg, &dir.path().join("split")).is_err());
}

#[test]
fn learnable_embedding_curvature_moves_and_stays_negative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Task::Embed,
        &[
            ("dataset", "tree:2,3"),
            ("epochs", "40"),
            ("curvature", "learnable"),
            ("euclid_lr", "0.05"),
        ],
    );
    let k = embed::run(&cfg, dir.path()).unwrap().curvature.unwrap();
    assert!(k < 0.0 && k != -1.0, "{k}");
}

#[test]
fn node_classification_separates_two_subtrees() {
    let dir = tempfile::tempdir().unwrap();
    // generated trees label each node by the root subtree that holds it
    let cfg = config(
        Task::Gnn,
        &[
            ("dataset", "tree:3,4"),
            ("gnn_task", "nc"),
            ("epochs", "200"),
            ("sweep", "-1,learnable"),
        ],
    );
    let o = gnn::run(&cfg, &dir.path().join("nc")).unwrap();
    assert_eq!(o.results.len(), 2);
    assert!(o.best().test >= 0.75, "{}", o.summary());
    let metrics = fs::read_to_string(dir.path().join("nc").join(METRICS_FILE)).unwrap();
    assert!(metrics.contains("best_test"));
}

#[test]
fn toy_and_lora_reject_bad_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Task::TransformerToy, &[("dim", "10"), ("heads", "4")]);
    assert!(toy::run(&cfg, dir.path()).is_err());
    assert!(lora::run(&config(Task::Lora, &[]), dir.path()).is_err());
    let missing = dir.path().join("nothing").to_string_lossy().into_owned();
    assert!(lora::run(&config(Task::Lora, &[("checkpoint", &missing)]), dir.path()).is_err());
    for seed in 0..20 {
        let p = lora::derangement(5, seed).unwrap();
        assert!(p.iter().enumerate().all(|(i, &v)| i != v));
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..5).collect::<Vec<_>>());
    }
    assert!(lora::derangement(1, 0).is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hypkit");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(bin)
        .args(["selftest", "--seed", "1"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));

    let bad = Command::new(bin)
        .args(["embed", "--curvature", "0.5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    let run = dir.path().join("runs").join("small");
    let small = Command::new(bin)
        .args(["embed", "--seed", "2", "--out"])
        .arg(&run)
        .args([
            "--config",
            &write(
                dir.path(),
                "embed.conf",
                "dataset = tree:2,2\nepochs = 10\n",
            ),
        ])
        .output()
        .unwrap();
    assert!(
        small.status.success(),
        "{}",
        String::from_utf8_lossy(&small.stderr)
    );
    let merged = Command::new(bin)
        .arg("report")
        .arg(dir.path().join("runs"))
        .output()
        .unwrap();
    assert!(merged.status.success());
    let report = fs::read_to_string(dir.path().join("runs").join("report.csv")).unwrap();
    assert!(report.starts_with("epoch,split,metric,value,run-id\n"));
    assert!(report.lines().skip(1).all(|l| l.ends_with(",small")));
}
