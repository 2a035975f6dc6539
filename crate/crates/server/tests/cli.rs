use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(data: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_logofuse"))
        .args(args)
        .env("LOGOFUSE_DATA", data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(data: &Path, args: &[&str]) -> Value {
    serde_json::from_slice(&run(data, args).stdout).unwrap()
}

#[test]
fn command_line_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["synth", "--logos", "40", "--groups", "2", "--per-group", "5", "--seed", "3", "--out", "corpus"]);
    assert!(d.join("corpus/images/40.png").is_file());

    let explain = run(d, &["taxonomy", "explain", "29.01.12", "26.01.01"]);
    let text = String::from_utf8(explain.stdout).unwrap();
    assert!(text.contains("color-count"), "{text}");
    assert!(text.contains("shape"), "{text}");
    let labels = json(d, &["taxonomy", "labels", "--kind", "color"]);
    assert_eq!(labels[0]["labels"].as_array().unwrap().len(), 13);

    let report = json(d, &["ingest", "corpus/manifest.jsonl"]);
    assert_eq!((report["total"].as_u64(), report["loaded"].as_u64()), (Some(40), Some(40)));

    run(d, &["split", "corpus/manifest.jsonl", "--ratio", "0.5", "--seed", "4", "--out", "corpus/half.jsonl"]);
    let half = std::fs::read_to_string(d.join("corpus/half.jsonl")).unwrap();
    assert_eq!(half.matches("\"split\":\"train\"").count(), 20);

    run(d, &["preprocess", "corpus/images/1.png", "--crop", "--out", "crop.png"]);
    let cropped = image::open(d.join("crop.png")).unwrap();
    assert!(cropped.width() < 128);

    run(d, &["extract", "corpus/manifest.jsonl", "--out", "feats"]);
    for kind in ["color", "shape", "text", "generic"] {
        assert!(d.join(format!("feats/{kind}.ncf")).is_file());
    }
    let built = json(
        d,
        &["index", "corpus/manifest.jsonl", "--features", "feats", "--out", "idx", "--train-lp", "shape", "--trees", "10"],
    );
    assert_eq!(built["indexed"], 40);
    assert!(d.join("idx/index.json").is_file());
    assert!(d.join("idx/thumbnails/1.png").is_file());

    let hits = json(d, &["search", "--index", "idx", "--weights", "color=0.3,shape=0.7", "--k", "5", "1"]);
    assert_eq!(hits["hits"].as_array().unwrap().len(), 5);
    assert_eq!(hits["hits"][0]["id"], 1);
    let by_image = json(d, &["search", "--index", "idx", "--preset", "color", "--k", "1", "corpus/images/2.png"]);
    assert_eq!(by_image["hits"][0]["id"], 2);

    let lp = json(d, &["classify", "--index", "idx", "--kind", "shape", "--method", "lp", "1"]);
    assert!(!lp["suggestions"]["shape"].as_array().unwrap().is_empty());

    std::fs::write(d.join("pred.csv"), "logo-id,label-id,score\n1,0,0.9\n1,1,0.2\n2,1,0.9\n2,0,0.1\n").unwrap();
    std::fs::write(d.join("truth.csv"), "1,0\n2,1\n").unwrap();
    let metrics = json(d, &["evaluate", "--kind", "shape", "--predictions", "pred.csv", "--truth", "truth.csv"]);
    assert_eq!((metrics["lrap"].as_f64(), metrics["lrl"].as_f64()), (Some(1.0), Some(0.0)));
    let nar = json(
        d,
        &["evaluate", "--kind", "shape", "--index", "idx", "--groups", "corpus/groups.json", "--preset", "color30-shape70"],
    );
    assert_eq!(nar["nar_queries"], 10);
    assert!(nar["nar"].as_f64().unwrap() < 0.05);
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_logofuse"))
        .args(["taxonomy", "explain", "99.99"])
        .env("LOGOFUSE_DATA", dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
