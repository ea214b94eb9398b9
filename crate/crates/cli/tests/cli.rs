use std::path::Path;
use std::process::{Command, Output};

fn binclust(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binclust"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn binclust")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = binclust(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn full_pipeline_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &["synth", "--out", "all.csv", "--n", "600", "--families", "5", "--dim", "12", "--benign-modes", "3", "--stddev", "0.4", "--seed", "4"],
        d,
    );
    ok(&["ingest", "--input", "all.csv", "--out", "all.bin"], d);
    ok(&["split", "--input", "all.bin", "--train-out", "train.bin", "--test-out", "test.bin", "--seed", "1"], d);
    ok(
        &["preprocess", "--train", "train.bin", "--train-out", "train.s.bin", "--model", "pipe.bin", "--test", "test.bin", "--test-out", "test.s.bin"],
        d,
    );
    ok(
        &["embed", "--method", "pca", "--components", "6", "--train", "train.s.bin", "--train-out", "train.e.bin", "--model", "pca.bin", "--test", "test.s.bin", "--test-out", "test.e.bin"],
        d,
    );
    for algo in [&["kmeans", "--k", "8"][..], &["birch", "--k", "8", "--threshold", "0.05"], &["hac", "--k", "8", "--subset-size", "200"], &["dbscan", "--eps", "1.5"]] {
        let mut fit = vec!["fit", "--algo", algo[0], "--data", "train.e.bin", "--model", "m.bin", "--assignments", "train.asg.csv"];
        fit.extend(&algo[1..]);
        ok(&fit, d);
        ok(&["predict", "--model", "m.bin", "--data", "test.e.bin", "--out", "test.asg.csv"], d);
        let asg = std::fs::read_to_string(d.join("test.asg.csv")).unwrap();
        assert_eq!(asg.lines().next(), Some("id,cluster"));
        let report = ok(&["evaluate", "--data", "test.e.bin", "--assignments", "test.asg.csv"], d);
        let v: serde_json::Value = serde_json::from_str(&report).unwrap();
        let h = v["homogeneity"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&h), "{} h = {h}", algo[0]);
        if algo[0] != "dbscan" {
            assert!(h > 0.9, "{} h = {h}", algo[0]);
        }
    }
}

const GRID: &str = r#"
name = "cli"
seeds = [0]
cluster_counts = [4, COUNT]

[dataset]
source = "synthetic"
n_samples = 300
n_families = 4
dim = 10

[[representations]]
method = "pca"
k = 4

[[clusterers]]
algo = "kmeans"
"#;

#[test]
fn grid_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("good.toml"), GRID.replace("COUNT", "6")).unwrap();
    let out = ok(&["grid", "--config", "good.toml", "--out", "good.csv", "--checkpoint", "ck.jsonl"], d);
    assert!(out.contains("2 runs (0 resumed, 0 failed)"), "{out}");
    assert!(d.join("good.best.csv").exists());
    let again = ok(&["grid", "--config", "good.toml", "--out", "good.csv", "--checkpoint", "ck.jsonl"], d);
    assert!(again.contains("2 resumed"), "{again}");
    let out = ok(&["report", "--input", "ck.jsonl", "--out", "again.json"], d);
    assert!(out.contains("2 records, 0 failed"), "{out}");
    let out = ok(&["ablate", "--config", "good.toml", "--out", "abl.json", "--pivot", "pivot.csv", "--components", "2,4"], d);
    assert!(out.contains("H-train-2") && out.contains("H-train-4"), "{out}");

    // more clusters than training rows: the slice fails, the grid finishes
    std::fs::write(d.join("partial.toml"), GRID.replace("COUNT", "100000")).unwrap();
    let partial = binclust(&["grid", "--config", "partial.toml", "--out", "partial.json"], d);
    assert_eq!(partial.status.code(), Some(2));
    let recs: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("partial.json")).unwrap()).unwrap();
    assert_eq!(recs.as_array().unwrap().len(), 2);

    std::fs::write(d.join("bad.toml"), "name = 'x'\nseeds = []\n").unwrap();
    let bad = binclust(&["grid", "--config", "bad.toml", "--out", "bad.json"], d);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}
