use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scdt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three levels on a chain `a - b - c`: `b` always rains, `a` half the time, `c` never.
fn chain_toy(dir: &Path) {
    fs::write(
        dir.join("abc.json"),
        r#"{"name":"abc","levels":["a","b","c"],"edges":[["a","b"],["b","c"]]}"#,
    )
    .unwrap();
    fs::write(
        dir.join("schema.json"),
        r#"{"target":"y","task":"binary","features":[{"name":"x","kind":"structured","graph":"abc.json"}]}"#,
    )
    .unwrap();
    let mut csv = String::from("x,y\n");
    for _ in 0..10 {
        csv.push_str("a,1\nb,1\nc,0\na,0\nb,1\nc,0\n");
    }
    fs::write(dir.join("data.csv"), csv).unwrap();
}

#[test]
fn enumerate_counts() {
    let count = |g: &str, mode: &str| {
        stdout(&scdt(&["enumerate", "--graph", g, "--mode", mode, "--count"]))
            .trim()
            .to_string()
    };
    assert_eq!(count("builtin:grid:4x4", "mp"), "627");
    assert_eq!(count("builtin:grid:5x5", "cs_half"), "285938");
    assert_eq!(count("builtin:chain:5", "mp"), "4");
    assert_eq!(count("builtin:grid:3x3", "cs"), "218");
}

#[test]
fn enumerate_lists_one_split_per_line() {
    let out = stdout(&scdt(&["enumerate", "--graph", "builtin:cycle:4", "--list"]));
    assert_eq!(out.lines().count(), 6);
    for line in out.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn missing_graph_file_fails() {
    let o = scdt(&["enumerate", "--graph", "/nonexistent/graph.json", "--count"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn toy_chain_splits_off_the_dry_level() {
    let dir = tempfile::tempdir().unwrap();
    chain_toy(dir.path());
    let model = dir.path().join("model.json");
    let data = dir.path().join("data.csv");
    let schema = dir.path().join("schema.json");
    stdout(&scdt(&[
        "train", "--data", p(&data), "--schema", p(&schema), "--model", p(&model),
        "--max-depth", "1", "--n-trees", "1", "--learning-rate", "1.0",
    ]));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let root = &json["trees"][0]["nodes"][0];
    let mut sides: Vec<Vec<String>> = root["branches"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| serde_json::from_value(b["levels"].clone()).unwrap())
        .collect();
    sides.sort();
    assert_eq!(sides, vec![vec!["a", "b"], vec!["c"]]);
}

#[test]
fn training_is_reproducible_and_predict_works() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    stdout(&scdt(&["synth", "--n-rows", "600", "--out-dir", p(&synth)]));
    for f in ["counties.json", "months.json", "schema.json", "data.csv", "truth.csv"] {
        assert!(synth.join(f).exists(), "{f} missing");
    }

    let train = |name: &str| {
        let model = dir.path().join(name);
        stdout(&scdt(&[
            "train",
            "--data", p(&synth.join("data.csv")),
            "--schema", p(&synth.join("schema.json")),
            "--model", p(&model),
            "--n-trees", "20",
            "--max-splits-to-search", "5",
            "--valid-fraction", "0.25",
            "--seed", "3",
        ]));
        fs::read(&model).unwrap()
    };
    let a = train("a.json");
    assert_eq!(a, train("b.json"));

    let out = dir.path().join("pred.csv");
    stdout(&scdt(&[
        "predict", "--model", p(&dir.path().join("a.json")),
        "--data", p(&synth.join("data.csv")), "--out", p(&out),
    ]));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,probability"));
    let probs: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 600);
    assert!(probs.iter().all(|&q| q > 0.0 && q < 1.0));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "county,month\nr0c0,Jan\nnowhere,Feb\n").unwrap();
    let o = scdt(&["predict", "--model", p(&dir.path().join("a.json")), "--data", p(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));
}
