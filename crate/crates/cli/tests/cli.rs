use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_clarifeval"));
    cmd.env_remove("CLARIFEVAL_RULES");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn sample_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/sample_dialogues.json")
}

#[test]
fn oracle_pipeline_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for step in [
        &["synth", "--seed", "3", "--n-dialogues", "40", "--out", "corpus.json"][..],
        &["extract-ce", "--corpus", "corpus.json", "--out", "ces.json"],
        &["tag", "--corpus", "corpus.json", "--ces", "ces.json", "--out", "tagged.json"],
        &["resolve", "--corpus", "corpus.json", "--resolver", "oracle", "--out", "oracle.jsonl"],
        &[
            "evaluate", "--corpus", "corpus.json", "--predictions", "oracle.jsonl", "--ces", "tagged.json", "--format",
            "structured", "--out", "report.json",
        ],
    ] {
        let out = run(d, step);
        assert!(out.status.success(), "{step:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["model_name"], "oracle");
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows[0]["value"]["f1_micro"], 1.0);
    assert!(rows[1]["n"].as_u64().unwrap() > 0);
    assert_eq!(rows[1]["value"]["after"]["f1_micro"], 1.0);
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["extract-ce", "--corpus", "nope.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn unknown_flag_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["stats", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn existing_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("corpus.json"), "keep me").unwrap();
    let out = run(d, &["synth", "--n-dialogues", "5", "--out", "corpus.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(fs::read_to_string(d.join("corpus.json")).unwrap(), "keep me");
    let out = run(d, &["synth", "--n-dialogues", "5", "--out", "corpus.json", "--force"]);
    assert!(out.status.success());
    assert_ne!(fs::read_to_string(d.join("corpus.json")).unwrap(), "keep me");
}

#[test]
fn rules_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = sample_corpus();
    let corpus = corpus.to_str().unwrap();
    assert!(run(d, &["extract-ce", "--corpus", corpus, "--out", "ces.json"]).status.success());
    assert!(run(d, &["tag", "--corpus", corpus, "--ces", "ces.json", "--out", "default.json"]).status.success());

    let shipped = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/rules/default_rules.toml")).unwrap();
    let custom = shipped.replace("positional = \"RelationalContext\"", "positional = \"DialogueHistory\"");
    assert_ne!(custom, shipped);
    fs::write(d.join("custom.toml"), custom).unwrap();
    let out = bin()
        .current_dir(d)
        .env("CLARIFEVAL_RULES", "custom.toml")
        .args(["tag", "--corpus", corpus, "--ces", "ces.json", "--out", "custom.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_ne!(fs::read(d.join("default.json")).unwrap(), fs::read(d.join("custom.json")).unwrap());

    fs::write(d.join("broken.toml"), "type_only_counts = [").unwrap();
    let out = bin()
        .current_dir(d)
        .env("CLARIFEVAL_RULES", "broken.toml")
        .args(["tag", "--corpus", corpus, "--ces", "ces.json", "--out", "broken.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
