//! End-to-end runs of the `lveg` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn lveg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lveg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = lveg(args);
    assert!(
        out.status.success(),
        "lveg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train_toy(dir: &Path, name: &str, jobs: &str) -> (PathBuf, Vec<serde_json::Value>) {
    let model = dir.join(name);
    let metrics = dir.join(format!("{name}.metrics"));
    let treebank = data("toy_treebank.mrg");
    ok(&[
        "train", "--train", p(&treebank), "--model", p(&model), "--metrics", p(&metrics), "--d", "3", "--K", "4",
        "--alpha", "8", "--epochs", "15", "--lr", "0.05", "--batch-size", "5", "--jobs", jobs,
    ]);
    let lines = std::fs::read_to_string(&metrics)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    (model, lines)
}

#[test]
fn train_parse_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (model, metrics) = train_toy(dir.path(), "toy.json", "2");
    assert_eq!(metrics.len(), 16);
    let first = metrics[0]["train_nll"].as_f64().unwrap();
    let last = metrics[15]["train_nll"].as_f64().unwrap();
    assert!(last < first, "{last} >= {first}");

    let treebank = data("toy_treebank.mrg");
    let parsed = ok(&["parse", "--model", p(&model), "--test", p(&treebank)]).stdout;
    let parsed = String::from_utf8(parsed).unwrap();
    let trees = lveg::corpus::read_penn(&parsed).unwrap();
    assert_eq!(trees.len(), 50);
    let reprinted: String = trees.iter().map(|t| format!("{t}\n")).collect();
    assert_eq!(reprinted, parsed);
    assert!(!parsed.contains('@'));

    let pred = dir.path().join("pred.mrg");
    std::fs::write(&pred, &parsed).unwrap();
    let score = ok(&["eval", "--gold", p(&treebank), "--pred", p(&pred)]).stdout;
    let score: serde_json::Value = serde_json::from_slice(&score).unwrap();
    assert!(score["f1"].as_f64().unwrap() >= 95.0, "{score}");
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = train_toy(dir.path(), "a.json", "1");
    let (b, _) = train_toy(dir.path(), "b.json", "3");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let sentences = dir.path().join("sentences.txt");
    std::fs::write(&sentences, "the man saw a dog with a telescope\njohn liked the friend of a cat\nthe zebra saw mary\n").unwrap();
    let pa = ok(&["parse", "--model", p(&a), "--test", p(&sentences), "--jobs", "1"]).stdout;
    let pb = ok(&["parse", "--model", p(&b), "--test", p(&sentences), "--jobs", "3"]).stdout;
    assert_eq!(pa, pb);
    assert_eq!(String::from_utf8(pa).unwrap().lines().count(), 3);
}

#[test]
fn unpruned_parse_matches_library_parse() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = train_toy(dir.path(), "m.json", "2");
    let treebank = data("toy_treebank.mrg");
    let out = ok(&["parse", "--model", p(&model), "--test", p(&treebank), "--p-min", "0", "--no-prune"]).stdout;
    let grammar = lveg::Grammar::from_json(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let expected: String = lveg::corpus::read_penn(&std::fs::read_to_string(&treebank).unwrap())
        .unwrap()
        .iter()
        .map(|t| {
            let words: Vec<String> = t.words().into_iter().cloned().collect();
            let ids = grammar.symbols().map_sentence(&words).unwrap();
            let tree = lveg::inference::parse(&grammar, &ids, 0.0, &lveg::PruneRule::Off).unwrap();
            format!("{}\n", lveg::corpus::debinarize(&grammar.pcfg().tree_names(&tree)).with_words(&words))
        })
        .collect();
    assert_eq!(String::from_utf8(out).unwrap(), expected);
}

#[test]
fn tagging_the_deterministic_corpus_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data("toy_tagged.conllu");
    let model = dir.path().join("tagger.json");
    ok(&["train-tagger", "--train", p(&corpus), "--model", p(&model), "--epochs", "2", "--metrics", p(&dir.path().join("m"))]);
    let out = ok(&["tag", "--model", p(&model), "--test", p(&corpus)]);
    let report = String::from_utf8(out.stderr).unwrap();
    let report: serde_json::Value = report
        .lines()
        .find_map(|l| serde_json::from_str(l).ok())
        .expect("accuracy report");
    assert_eq!(report["token_accuracy"].as_f64(), Some(1.0));
    assert_eq!(report["sentence_accuracy"].as_f64(), Some(1.0));

    let tagged = dir.path().join("tagged.txt");
    std::fs::write(&tagged, out.stdout).unwrap();
    let score = ok(&["eval", "--tags", "--gold", p(&corpus), "--pred", p(&tagged)]).stdout;
    let score: serde_json::Value = serde_json::from_slice(&score).unwrap();
    assert_eq!(score["token_accuracy"].as_f64(), Some(1.0));
}

#[test]
fn config_file_fills_unset_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let treebank = data("toy_treebank.mrg");
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"epochs": 2, "K": 2, "d": 1, "lr": 0.05}"#).unwrap();
    let model = dir.path().join("m.json");
    let metrics = dir.path().join("metrics");
    ok(&[
        "train", "--config", p(&config), "--train", p(&treebank), "--model", p(&model), "--metrics", p(&metrics),
        "--epochs", "1",
    ]);
    assert_eq!(std::fs::read_to_string(&metrics).unwrap().lines().count(), 2);
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(saved["K"], 2);
    assert_eq!(saved["d"], 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lveg(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(lveg(&["train", "--model", "x.json"]).status.code(), Some(1));
    let bad_config = dir.path().join("bad.json");
    std::fs::write(&bad_config, r#"{"epoch": 3}"#).unwrap();
    let treebank = data("toy_treebank.mrg");
    assert_eq!(
        lveg(&["train", "--config", p(&bad_config), "--train", p(&treebank), "--model", "x"]).status.code(),
        Some(1)
    );
    let missing = dir.path().join("missing.mrg");
    assert_eq!(
        lveg(&["train", "--train", p(&missing), "--model", p(&dir.path().join("m"))]).status.code(),
        Some(2)
    );
    let broken = dir.path().join("broken.mrg");
    std::fs::write(&broken, "(S (NP the").unwrap();
    assert_eq!(
        lveg(&["train", "--train", p(&broken), "--model", p(&dir.path().join("m"))]).status.code(),
        Some(2)
    );
    let out = lveg(&["verify", "--instances", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8(out.stdout).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("PASS")).count(), 7, "{report}");
}
