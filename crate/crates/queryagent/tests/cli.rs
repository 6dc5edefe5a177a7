mod support;

use std::process::Command;

use support::fixtures;

fn queryagent() -> Command {
    Command::new(env!("CARGO_BIN_EXE_queryagent"))
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn run_writes_a_replayable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let f = fixtures().join("kilburn");
    let stdout = ok(queryagent()
        .arg("run")
        .arg("--kb")
        .arg(f.join("kb.tsv"))
        .arg("--question-file")
        .arg(f.join("question.json"))
        .arg("--transcript")
        .arg(f.join("transcript.json"))
        .arg("--trace-out")
        .arg(&trace));
    assert!(stdout.contains("answer: [m.atlas]"), "{stdout}");
    assert!(stdout.contains("corrections 2"), "{stdout}");

    let replayed = ok(queryagent().arg("replay").arg("--trace").arg(&trace));
    assert!(replayed.starts_with("replay identical"));
    assert!(ok(queryagent()
        .arg("replay")
        .arg("--trace")
        .arg(f.join("trace.golden.jsonl")))
    .starts_with("replay identical"));
}

#[test]
fn bench_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.json");
    let stdout = ok(queryagent()
        .arg("bench")
        .arg("--fixtures")
        .arg(fixtures().join("bench/suite.json"))
        .arg("--metrics-out")
        .arg(&metrics));
    assert!(stdout.contains("macro-F1 1.0000"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(report["aggregate"]["total_store_queries"], 49);
    assert_eq!(report["questions"].as_array().unwrap().len(), 10);
}

#[test]
fn ablation_reports_every_strategy() {
    let stdout = ok(queryagent()
        .arg("bench")
        .arg("--ablation")
        .arg("--fixtures")
        .arg(fixtures().join("bench/suite_injected.json")));
    for s in ["eraser", "zeroshot", "fewshot", "off"] {
        assert!(stdout.contains(&format!("strategy {s}\n")), "{stdout}");
    }
}

#[test]
fn triggers_prints_editable_config() {
    let stdout = ok(queryagent().arg("triggers").arg("--dialect").arg("table"));
    let settings: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let kinds: Vec<&str> = settings
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["kind"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"EmptyConditionResult"));
}

#[test]
fn bad_input_fails_cleanly() {
    let f = fixtures().join("kilburn");
    let out = queryagent()
        .arg("run")
        .arg("--table")
        .arg(fixtures().join("table/songs.csv"))
        .arg("--question-file")
        .arg(f.join("question.json"))
        .arg("--transcript")
        .arg(f.join("transcript.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("triple dialect"));

    let out = queryagent()
        .arg("bench")
        .arg("--fixtures")
        .arg("/no/such/suite.json")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
