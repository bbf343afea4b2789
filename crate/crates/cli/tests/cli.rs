use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use commdet::experiment::{from_csv, MetricsRow, RunReport};
use commdet::graph::{load_edge_list, load_labels};
use commdet::metrics::modularity_score;
use commdet::CommunityAssignment;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn commdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commdet")).args(args).env("RUST_BACKTRACE", "0").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = commdet(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn karate_args<'a>(edges: &'a str, labels: &'a str) -> Vec<&'a str> {
    vec!["--edges", edges, "--labels", labels, "--epochs", "30"]
}

#[test]
fn train_writes_recomputable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, labels) = (data("karate.edges"), data("karate.labels"));
    let (edges, labels) = (edges.to_str().unwrap(), labels.to_str().unwrap());
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--seeds", "0..2", "--out", out];
    args.extend(karate_args(edges, labels));
    let stdout = ok(&args);
    assert!(stdout.contains("best NMI"), "{stdout}");

    let report = RunReport::from_json(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.seeds.len(), 2);
    let rows: Vec<MetricsRow> = from_csv(&fs::read_to_string(dir.path().join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows, report.metrics_rows());
    assert!(fs::read_to_string(dir.path().join("timings.csv")).unwrap().starts_with("phase,seed,seconds"));

    for seed in &report.seeds {
        let graph = load_edge_list(edges, false).unwrap();
        let persisted = load_labels(dir.path().join(format!("seed-{}.assignment", seed.seed)), graph.clone()).unwrap();
        let assignment = CommunityAssignment::from_labels(persisted.labels().unwrap().to_vec());
        assert_eq!(modularity_score(&graph, &assignment).unwrap(), seed.q);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("karate.cfg");
    fs::write(
        &cfg,
        format!(
            "edges = {}\nlabels = {}\nepochs = 5\nseeds = 0..4\nmodel = onestage\n",
            data("karate.edges").display(),
            data("karate.labels").display()
        ),
    )
    .unwrap();
    let out = dir.path().join("run");
    ok(&["train", "--config", cfg.to_str().unwrap(), "--seeds", "7", "--out", out.to_str().unwrap()]);
    let report = RunReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![7]);
    assert_eq!(report.model.as_str(), "onestage");

    fs::write(&cfg, "edges = x\nepochs = many\n").unwrap();
    let bad = commdet(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains(":2:"), "{}", String::from_utf8_lossy(&bad.stderr));
}

#[test]
fn eval_is_deterministic_and_rejects_single_community() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, labels) = (data("karate.edges"), data("karate.labels"));
    let (edges, labels) = (edges.to_str().unwrap(), labels.to_str().unwrap());
    let train_dir = dir.path().join("train");
    let mut args = vec!["train", "--out", train_dir.to_str().unwrap()];
    args.extend(karate_args(edges, labels));
    ok(&args);
    let ckpt = train_dir.join("seed-0.ckpt");
    let ckpt = ckpt.to_str().unwrap();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let stdout = ok(&["eval", "--checkpoint", ckpt, "--edges", edges, "--k", "2..6", "--out", out.to_str().unwrap()]);
        assert!(stdout.starts_with("k\tQ\tinertia"), "{stdout}");
        assert!(out.join("sweep.csv").exists());
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let rejected = commdet(&["eval", "--checkpoint", ckpt, "--edges", edges, "--k", "1"]);
    assert!(!rejected.status.success());
    let mismatch = commdet(&["eval", "--checkpoint", ckpt, "--edges", data("lesmis.edges").to_str().unwrap(), "--k", "3"]);
    assert!(!mismatch.status.success());
}

#[test]
fn gradcheck_and_argument_errors() {
    let stdout = ok(&["gradcheck", "--instances", "2"]);
    assert_eq!(stdout.lines().filter(|l| l.ends_with("ok")).count(), 4);
    assert!(!commdet(&["scaling", "--n-list", "100,100,100"]).status.success());
    assert!(!commdet(&["infer-bench", "--synthetic-nodes", "100", "--split-fraction", "0", "--layer-dims", "8,8,4"])
        .status
        .success());
    assert!(!commdet(&["train", "--edges", "/nonexistent.edges"]).status.success());
}
