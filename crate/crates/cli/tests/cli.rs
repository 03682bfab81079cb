use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn asqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asqp"))
        .args(args)
        .env_remove("ASQP_CONFIG_DIR")
        .env_remove("ASQP_CONFIG")
        .output()
        .expect("spawn asqp")
}

fn ok(args: &[&str]) -> String {
    let out = asqp(args);
    assert!(
        out.status.success(),
        "asqp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Ingests the bundled mini corpus into `dir/corpus.jsonl`.
fn ingest(dir: &Path) -> PathBuf {
    let out = dir.join("corpus.jsonl");
    ok(&[
        "ingest",
        "--acos",
        s(&data("mini.tsv")),
        "--conllu",
        s(&data("mini.conllu")),
        "--out",
        s(&out),
    ]);
    out
}

#[test]
fn ingest_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    assert_eq!(lines(&corpus).len(), 7);

    let from_acos: Value = serde_json::from_str(&ok(&["stats", "--acos", s(&data("mini.tsv"))])).unwrap();
    let from_corpus: Value = serde_json::from_str(&ok(&["stats", "--corpus", s(&corpus)])).unwrap();
    assert_eq!(from_acos, from_corpus);
    assert_eq!(from_acos["sentence_count"], 7);
    assert_eq!(from_acos["quad_count"], 10);
}

#[test]
fn build_dataset_writes_one_file_per_task() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let out = dir.path().join("train");
    ok(&[
        "build-dataset",
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&out),
        "--task",
        "all",
    ]);
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 9, "{names:?}");
    for name in &names {
        let records = lines(&out.join(name));
        assert_eq!(records.len(), 7, "{name}");
        for record in &records {
            assert!(record["output"].as_str().unwrap().ends_with("<|im_end|>"));
            assert!(!record["instruction"].as_str().unwrap().is_empty());
        }
    }
    assert!(names.contains(&"extract_ao.jsonl".to_string()));
    assert!(names.contains(&"classify_pair.jsonl".to_string()));
}

#[test]
fn build_dataset_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&[
            "build-dataset",
            "--corpus",
            s(&corpus),
            "--out-dir",
            s(out),
            "--jobs",
            "2",
        ]);
    }
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn style_switch_changes_only_the_syntax_lines() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let mut inputs = Vec::new();
    // nl, symbol, none
    for style in ["nl-syn", "symbol-syn", "none"] {
        let out = dir.path().join(style);
        ok(&[
            "build-dataset",
            "--corpus",
            s(&corpus),
            "--out-dir",
            s(&out),
            "--task",
            "extract_ao",
            "--style",
            style,
        ]);
        inputs.push(lines(&out.join("extract_ao.jsonl")));
    }
    for ((nl, symbol), none) in inputs[0].iter().zip(&inputs[1]).zip(&inputs[2]) {
        assert_eq!(nl["output"], none["output"]);
        let [nl, symbol, none] = [nl, symbol, none].map(|r| r["input"].as_str().unwrap().to_string());
        assert!(nl.contains("dependency relation: "));
        assert!(symbol.contains("dependency relation: "));
        assert_ne!(nl, symbol);
        assert!(!none.contains("dependency relation"));
        assert_eq!(nl.lines().next(), none.lines().next());
    }
}

#[test]
fn build_dataset_modes_and_step_files() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let prompt = dir.path().join("prompt");
    ok(&[
        "build-dataset",
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&prompt),
        "--mode",
        "prompt",
    ]);
    assert!(lines(&prompt.join("classify_pair.jsonl"))
        .iter()
        .all(|r| r["output"] == ""));

    let plain = dir.path().join("plain");
    ok(&[
        "build-dataset",
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&plain),
        "--no-eos",
        "--concat-steps",
    ]);
    let step1 = lines(&plain.join("step1.jsonl"));
    let step2 = lines(&plain.join("step2.jsonl"));
    assert_eq!(step1.len(), 4 * 7);
    assert_eq!(step2.len(), 5 * 7);
    assert!(step1
        .iter()
        .all(|r| !r["output"].as_str().unwrap().contains("<|im_end|>")));
}

#[test]
fn decode_reads_raw_lines() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    fs::write(
        &raw,
        concat!(
            r#"{"sentence_id":"a","task":"classify_pair","raw_output":"aspect: Pizza, opinion: great, category: food quality, sentiment: positive | junk<|im_end|>"}"#,
            "\n",
            r#"{"sentence_id":"b","task":"extract_ao","raw_output":"aspect: NULL, opinion: slow"}"#,
            "\n"
        ),
    )
    .unwrap();
    let stdout = ok(&["decode", "--input", s(&raw)]);
    let decoded: Vec<Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(decoded.len(), 2);
    assert_eq!(decoded[0]["malformed_count"], 1);
    assert_eq!(decoded[0]["predictions"][0]["aspect"], "pizza");
    assert_eq!(decoded[1]["predictions"][0]["aspect"], Value::Null);

    let out = dir.path().join("decoded.jsonl");
    ok(&[
        "decode",
        "--input",
        s(&raw),
        "--out",
        s(&out),
        "--fields",
        "aspect,opinion",
    ]);
    let decoded = lines(&out);
    assert_eq!(decoded[1]["predictions"][0]["opinion"], "slow");
}

#[test]
fn gold_pipeline_and_evaluate_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let run = dir.path().join("run");
    let report: Value = serde_json::from_str(&ok(&[
        "pipeline",
        "--corpus",
        s(&corpus),
        "--run-dir",
        s(&run),
        "--predictor",
        "gold",
        "--json",
    ]))
    .unwrap();
    assert_eq!(report["quad"]["f1"], 1.0);
    assert_eq!(report["pair"]["f1"], 1.0);
    assert_eq!(report["isolated_stage2"]["category_accuracy"], 1.0);
    for artifact in ["config.json", "report.json", "report.txt", "stage1/merged_pairs.jsonl"] {
        assert!(run.join(artifact).exists(), "{artifact}");
    }
    let text = ok(&[
        "pipeline",
        "--corpus",
        s(&corpus),
        "--run-dir",
        s(&run),
        "--predictor",
        "gold",
    ]);
    assert!(text.contains("100.0"), "{text}");

    let raw = run.join("stage2/raw_classify_pair.jsonl");
    let quad: Value = serde_json::from_str(&ok(&[
        "evaluate",
        "--corpus",
        s(&corpus),
        "--predictions",
        s(&raw),
        "--json",
    ]))
    .unwrap();
    assert_eq!(quad["quad"]["f1"], 1.0);
    let decoded = run.join("stage1/decoded_extract_ao.jsonl");
    let pair: Value = serde_json::from_str(&ok(&[
        "evaluate",
        "--corpus",
        s(&corpus),
        "--predictions",
        s(&decoded),
        "--granularity",
        "pair",
        "--json",
    ]))
    .unwrap();
    assert_eq!(pair["pair"]["recall"], 1.0);
    let isolated = run.join("stage2_gold_pairs/raw_classify_pair.jsonl");
    let element: Value = serde_json::from_str(&ok(&[
        "evaluate",
        "--corpus",
        s(&corpus),
        "--predictions",
        s(&isolated),
        "--granularity",
        "element",
        "--json",
    ]))
    .unwrap();
    assert_eq!(element["category_accuracy"], 1.0);
    assert_eq!(element["sentiment_accuracy"], 1.0);
    assert_eq!(element["positions"], 10);
}

#[test]
fn heuristic_pipeline_and_stage2_only() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let run = dir.path().join("heuristic");
    let report: Value = serde_json::from_str(&ok(&[
        "pipeline",
        "--corpus",
        s(&corpus),
        "--run-dir",
        s(&run),
        "--predictor",
        "heuristic",
        "--json",
    ]))
    .unwrap();
    let f1 = report["quad"]["f1"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&f1), "{f1}");

    let stage2 = dir.path().join("stage2");
    let report: Value = serde_json::from_str(&ok(&[
        "pipeline",
        "--corpus",
        s(&corpus),
        "--run-dir",
        s(&stage2),
        "--predictor",
        "heuristic",
        "--stage2-only",
        "--heuristic-sentiment",
        "negative",
        "--json",
    ]))
    .unwrap();
    assert_eq!(report["positions"], 10);
    assert_eq!(report["sentiment_accuracy"], 0.3);
}

#[test]
fn exec_predictor_talks_to_serve() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let run = dir.path().join("exec");
    let report: Value = serde_json::from_str(&ok(&[
        "pipeline",
        "--corpus",
        s(&corpus),
        "--run-dir",
        s(&run),
        "--predictor",
        "exec",
        "--exec-cmd",
        env!("CARGO_BIN_EXE_asqp"),
        "--exec-arg=serve",
        "--exec-arg=--corpus",
        &format!("--exec-arg={}", s(&corpus)),
        "--json",
    ]))
    .unwrap();
    assert_eq!(report["quad"]["f1"], 1.0);
}

#[test]
fn failing_subprocess_is_reported_with_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest(dir.path());
    let run = dir.path().join("broken");
    let out = asqp(&[
        "pipeline",
        "--corpus",
        s(&corpus),
        "--run-dir",
        s(&run),
        "--predictor",
        "exec",
        "--exec-cmd",
        "false",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(run.join("config.json").exists());
    assert!(!run.join("report.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(asqp(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(asqp(&["build-dataset", "--out-dir", "x"]).status.code(), Some(2));
    assert_eq!(
        asqp(&["build-dataset", "--corpus", "c", "--out-dir", "x", "--hops", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        asqp(&["ingest", "--acos", "a", "b", "--conllu", "c", "--out", "o"])
            .status
            .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.jsonl");
    let out = asqp(&["stats", "--corpus", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));
    let out = asqp(&[
        "ingest",
        "--acos",
        s(&data("mini.tsv")),
        "--conllu",
        s(&data("worked.conllu")),
        "--out",
        s(&dir.path().join("o.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_lists_subcommands() {
    let help = ok(&["--help"]);
    for command in [
        "ingest",
        "stats",
        "build-dataset",
        "decode",
        "evaluate",
        "pipeline",
        "serve",
    ] {
        assert!(help.contains(command), "{command}");
    }
}
