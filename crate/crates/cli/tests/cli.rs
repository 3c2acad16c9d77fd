use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn droidtriage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_droidtriage"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = droidtriage(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_corpus(tmp: &TempDir) -> std::path::PathBuf {
    let spec = tmp.path().join("spec.csv");
    fs::write(
        &spec,
        "feature,benign_count,malware_count\nREAD_SMS,2,30\nSEND_SMS,5,25\nchmod,3,20\n.apk,6,18\ngetDeviceId,12,28\nINTERNET,35,36\n",
    )
    .unwrap();
    let root = tmp.path().join("corpus");
    ok(&[
        "gen",
        "--table",
        s(&spec),
        "--benign",
        "40",
        "--malware",
        "40",
        "--seed",
        "1",
        "--out",
        s(&root),
    ]);
    root
}

#[test]
fn usage_errors_exit_1() {
    let out = droidtriage(&["rank", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(droidtriage(&[]).status.code(), Some(1));
    assert_eq!(
        droidtriage(&["train", "--corpus", "x", "--features", "7f"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        droidtriage(&["train", "--corpus", "x", "--mode", "Q"]).status.code(),
        Some(1)
    );
    assert_eq!(
        droidtriage(&["train", "--corpus", "x", "--features", "10f", "--top", "3"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn help_exits_0() {
    let out = droidtriage(&["evaluate", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8_lossy(&out.stdout);
    assert!(help.contains("re-ranked on each training"));
    assert!(!help.contains("\x1b["), "NO_COLOR output has escape codes");
}

#[test]
fn data_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = droidtriage(&["rank", "--corpus", s(&tmp.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let root = small_corpus(&tmp);
    let again = droidtriage(&["gen", "--table", "table4", "--out", s(&root)]);
    assert_eq!(again.status.code(), Some(2), "non-empty output directory");
}

#[test]
fn extract_rank_train_classify() {
    let tmp = TempDir::new().unwrap();
    let root = small_corpus(&tmp);
    let vectors = tmp.path().join("v.csv");
    let stats = tmp.path().join("stats.csv");
    ok(&[
        "extract",
        "--corpus",
        s(&root),
        "--mode",
        "P",
        "--out",
        s(&vectors),
        "--stats",
        s(&stats),
    ]);
    let header = fs::read_to_string(&vectors)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(header.starts_with("app_id,label,"));
    assert_eq!(header.split(',').count(), 2 + 131);
    let stats = fs::read_to_string(&stats).unwrap();
    assert!(stats.starts_with("app_id,duration_ms,files_scanned,warnings\n"));
    assert_eq!(stats.lines().count(), 81);

    let ranking = ok(&["rank", "--vectors", s(&vectors), "--mode", "P"]);
    let first = ranking.lines().nth(1).unwrap();
    assert!(first.starts_with("1,READ_SMS,2,30,32,"), "{first}");

    // a C-mode ranking needs code columns the P-mode vectors lack
    assert_eq!(
        droidtriage(&["rank", "--vectors", s(&vectors), "--mode", "C"])
            .status
            .code(),
        Some(2)
    );

    let model = tmp.path().join("model.json");
    ok(&[
        "train",
        "--corpus",
        s(&root),
        "--mode",
        "M",
        "--top",
        "4",
        "--alpha",
        "0.5",
        "--out",
        s(&model),
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["features"].as_array().unwrap().len(), 4);
    assert_eq!(json["alpha"], serde_json::json!({"num": 5, "den": 10}));

    let preds = ok(&["classify", "--model", s(&model), "--corpus", s(&root)]);
    let mut lines = preds.lines();
    assert_eq!(lines.next(), Some("app_id,posterior,score,decision"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 80);
    for r in &rows {
        let p: f64 = r[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(r[3], if p >= 0.5 { "suspicious" } else { "benign" });
    }
    let strict = ok(&[
        "classify",
        "--model",
        s(&model),
        "--corpus",
        s(&root),
        "--threshold",
        "1.0",
    ]);
    assert!(strict
        .lines()
        .skip(1)
        .all(|l| l.ends_with("benign") || l.contains(",1,")));
}

#[test]
fn evaluate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let root = small_corpus(&tmp);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let sa = ok(&[
        "evaluate",
        "--corpus",
        s(&root),
        "--features",
        "5fT",
        "--seed",
        "3",
        "--jobs",
        "1",
        "--out",
        s(&a),
    ]);
    let sb = ok(&[
        "evaluate",
        "--corpus",
        s(&root),
        "--features",
        "5fT",
        "--seed",
        "3",
        "--jobs",
        "3",
        "--out",
        s(&b),
    ]);
    assert_eq!(sa, sb);
    for f in ["report.json", "metrics.csv", "roc.csv", "roc.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(sa.lines().last().unwrap().starts_with("5fT,"));
    let json = ok(&[
        "evaluate",
        "--corpus",
        s(&root),
        "--features",
        "5fT",
        "--out",
        s(&a),
        "--format",
        "json",
    ]);
    let avg: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(avg["acc"].as_f64().unwrap() > 0.5);
}

#[test]
fn bench_reports_every_setting() {
    let tmp = TempDir::new().unwrap();
    let root = small_corpus(&tmp);
    let out = tmp.path().join("bench.csv");
    ok(&["bench", "--corpus", s(&root), "--repeats", "1", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text.lines().map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows[0], ["setting", "features", "apps", "wall_ms", "per_app_ms"]);
    let names: Vec<(&str, &str)> = rows[1..].iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(
        names,
        [
            ("permissions-only", "131"),
            ("code-only", "58"),
            ("mixed-25", "25"),
            ("mixed-all", "189")
        ]
    );
}

#[test]
fn gen_accepts_shipped_table_names() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("t4");
    ok(&[
        "gen",
        "--table",
        "table4",
        "--benign",
        "1000",
        "--malware",
        "1000",
        "--out",
        s(&root),
    ]);
    let labels = fs::read_to_string(root.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 2001);
    assert_eq!(labels.matches(",benign").count(), 1000);
}
