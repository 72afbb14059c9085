use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn metadrift(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metadrift"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("METADRIFT_OUT")
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = metadrift(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Corpus and quickly trained checkpoint for window n = 10, L = 20.
fn trained(dir: &Path) -> PathBuf {
    ok(dir, &["gen", "--kind", "meta-corpus", "--per-class", "60", "--l", "20", "--n", "10", "--seed", "1"]);
    let corpus = dir.join("corpus.csv");
    ok(dir, &["train", "--corpus", p(&corpus), "--episodes", "300", "--seed", "2"]);
    dir.join("checkpoint.json")
}

#[test]
fn meta_corpus_has_one_row_per_trace() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--kind", "meta-corpus", "--per-class", "50", "--l", "100", "--n", "1"]);
    let text = std::fs::read_to_string(dir.path().join("corpus.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 101);
    assert_eq!(lines.count(), 200);
    let m = json(&dir.path().join("gen_manifest.json"));
    assert_eq!(m["command"], "gen");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["config"]["window"]["l"], 100);
}

#[test]
fn missing_l_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = metadrift(dir.path(), &["gen", "--kind", "meta-corpus", "--n", "25"]);
    assert_eq!(o.status.code(), Some(2));
    let o = metadrift(dir.path(), &["bench", "exp9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = metadrift(dir.path(), &["detect", "--checkpoint", "missing.json", "--input", "missing.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn toy_stream_carries_its_drift_schedule() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--kind", "toy", "--generator", "sea", "--length", "10000", "--drifts", "3"]);
    let text = std::fs::read_to_string(dir.path().join("sea.csv")).unwrap();
    let header = text.lines().next().unwrap().strip_prefix("# meta:").unwrap();
    let meta: Value = serde_json::from_str(header.trim()).unwrap();
    let drifts = meta["drifts"].as_array().unwrap();
    assert_eq!(drifts.len(), 3);
    assert_eq!(drifts[0]["position"], 2500);
    assert_eq!(text.lines().count(), 10_002);
}

#[test]
fn untrained_checkpoint_still_has_four_prototypes() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--kind", "meta-corpus", "--per-class", "30", "--l", "20", "--n", "5"]);
    let corpus = dir.path().join("corpus.csv");
    ok(dir.path(), &["train", "--corpus", p(&corpus), "--episodes", "0"]);
    let ck = json(&dir.path().join("checkpoint.json"));
    assert_eq!(ck["prototypes"]["centroids"].as_array().unwrap().len(), 4);
    assert_eq!(ck["window"]["n"], 5);

    ok(dir.path(), &["train", "--corpus", p(&corpus), "--arch", "rnn", "--episodes", "20", "--output", p(&dir.path().join("rnn.json"))]);
    let ck = json(&dir.path().join("rnn.json"));
    assert_eq!(ck["net"]["architecture"], "rnn");
    let curve = std::fs::read_to_string(dir.path().join("rnn_loss.csv")).unwrap();
    assert_eq!(curve.lines().count(), 21);
}

#[test]
fn too_few_samples_per_class_fails() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--kind", "meta-corpus", "--per-class", "10", "--l", "20", "--n", "5"]);
    let corpus = dir.path().join("corpus.csv");
    let o = metadrift(dir.path(), &["train", "--corpus", p(&corpus), "--ns", "5", "--nq", "15"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn detection_with_and_without_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    ok(dir.path(), &["gen", "--kind", "trace", "--drift-kind", "sudden", "--length", "4000", "--base-rate", "0.05", "--drift-rate", "0.6", "--seed", "4"]);
    let trace = dir.path().join("trace.txt");

    ok(dir.path(), &["detect", "--checkpoint", p(&ck), "--input", p(&trace), "--oracle", "ground-truth", "--budget", "10"]);
    let queries = std::fs::read_to_string(dir.path().join("queries.jsonl")).unwrap();
    assert!(queries.lines().count() <= 10);
    let summary = json(&dir.path().join("detection.json"));
    assert_eq!(summary["labels_applied"], summary["queries"]);
    assert!(dir.path().join("checkpoint_updated.json").exists());

    ok(dir.path(), &["detect", "--checkpoint", p(&ck), "--input", p(&trace), "--oracle", "none"]);
    assert_eq!(json(&dir.path().join("detection.json"))["queries"], 0);
    let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert_eq!(events.lines().next(), Some("timestamp,type,entropy"));
    assert!(events.lines().count() > 1, "the step should raise alarms");
}

#[test]
fn normal_trace_gives_an_empty_alarm_log() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    // One emission's worth of a stationary error stream.
    ok(dir.path(), &["gen", "--kind", "trace", "--drift-kind", "normal", "--length", "210", "--base-rate", "0.08", "--seed", "9"]);
    ok(dir.path(), &["detect", "--checkpoint", p(&ck), "--input", p(&dir.path().join("trace.txt"))]);
    let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert_eq!(events.trim(), "timestamp,type,entropy");
}

#[test]
fn stream_detection_reports_learner_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    ok(dir.path(), &["gen", "--kind", "toy", "--generator", "hyp", "--length", "3000", "--drifts", "1"]);
    ok(dir.path(), &["detect", "--checkpoint", p(&ck), "--input", p(&dir.path().join("hyp.csv")), "--oracle", "ground-truth"]);
    let s = json(&dir.path().join("detection.json"));
    let acc = s["accuracy"].as_f64().unwrap();
    assert!((0.5..=1.0).contains(&acc), "{acc}");
    assert_eq!(s["elements"], 3000);
}

#[test]
fn serve_without_answers_lets_queries_expire() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    ok(dir.path(), &["gen", "--kind", "trace", "--length", "1000", "--seed", "5"]);
    let trace = dir.path().join("trace.txt");
    ok(dir.path(), &["serve", "--checkpoint", p(&ck), "--input", p(&trace), "--port", "0", "--pace-ms", "0", "--budget", "3"]);
    let log = std::fs::read_to_string(dir.path().join("queries.jsonl")).unwrap();
    let statuses: Vec<String> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["status"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(statuses, vec!["expired"; 3]);
    assert_eq!(json(&dir.path().join("serve_manifest.json"))["command"], "serve");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.cfg");
    std::fs::write(&cfg, "# corpus settings\nkind = meta-corpus\nper_class = 7\nl = 20\nn = 5\n").unwrap();
    ok(dir.path(), &["gen", "--config", p(&cfg)]);
    let rows = std::fs::read_to_string(dir.path().join("corpus.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 28);
    ok(dir.path(), &["gen", "--config", p(&cfg), "--per-class", "3"]);
    let rows = std::fs::read_to_string(dir.path().join("corpus.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 12);
}

#[test]
fn output_dir_defaults_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_metadrift"))
        .args(["gen", "--kind", "trace", "--length", "100"])
        .env("METADRIFT_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("trace.txt").exists());
    assert!(dir.path().join("gen_manifest.json").exists());
}

#[test]
fn bench_exp3_subset_has_two_stream_columns() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "bench", "exp3", "--generators", "sea,hyp", "--seeds", "1", "--length", "3000", "--train-per-class", "40",
        "--episodes", "30", "--seed", "3",
    ];
    let o = ok(dir.path(), &args);
    let table = String::from_utf8(o.stdout).unwrap();
    let header = table.lines().next().unwrap();
    assert!(header.contains("sea Acc") && header.contains("hyp F1"));
    assert!(!header.contains("agr"));
    let report = json(&dir.path().join("exp3_report.json"));
    let streams: std::collections::BTreeSet<&str> =
        report["runs"].as_array().unwrap().iter().map(|r| r["stream"].as_str().unwrap()).collect();
    assert_eq!(streams.into_iter().collect::<Vec<_>>(), vec!["hyp", "sea"]);
    let m = json(&dir.path().join("bench_manifest.json"));
    assert!(m["wall_clock_seconds"].as_f64().unwrap() > 0.0);
    assert!(report.get("wall_clock_seconds").is_none());
}
