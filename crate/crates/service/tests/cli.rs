use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aibat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aibat"))
        .args(args)
        .env_remove("AIBAT_ENDPOINT_URL")
        .env_remove("AIBAT_OCR_CMD")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_chain_on_the_fixture_drawing() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    let job = tmp.path().join("job");
    let mock = fx.join("mock.json");

    ok(&aibat(&["render-fixtures", "--out", s(&fx)]));
    let pages = fx.join("123456789");
    assert!(pages.join("page-0.png").exists());
    for f in ["manifest.json", "mock.json", "template.json", "corpus-spec.json"] {
        assert!(fx.join(f).exists(), "{f}");
    }

    ok(&aibat(&["extract", "--input", s(&pages), "--mock", s(&mock), "--out", s(&job)]));
    ok(&aibat(&["parse", "--input", s(&job), "--mock", s(&mock)]));
    ok(&aibat(&[
        "generate",
        "--input",
        s(&job),
        "--template",
        s(&fx.join("template.json")),
        "--mock",
        s(&mock),
    ]));
    ok(&aibat(&["evaluate", "--input", s(&job), "--truth", s(&fx.join("manifest.json"))]));

    let notes = read(&job.join("notes.json"));
    assert_eq!(notes["notes"].as_array().unwrap().len(), 22);
    let parsed = read(&job.join("parsed.json"));
    assert_eq!(parsed["parsed"].as_array().unwrap().len(), 22);
    assert!(parsed["unparsed"].as_array().unwrap().is_empty());
    let generated = read(&job.join("generated.json"));
    assert!(generated["failures"].as_array().unwrap().is_empty());
    assert!(!generated["generated"].as_array().unwrap().is_empty());

    let metrics = read(&job.join("metrics.json"));
    assert_eq!(metrics["cer_mean"].as_f64(), Some(0.0));
    assert_eq!(metrics["cer_std"].as_f64(), Some(0.0));
    assert_eq!(metrics["flagged_accuracy"].as_f64(), Some(1.0));
    assert!(metrics["pr01"].is_null());
    assert!(metrics["cost"]["total_dollars"].as_f64().unwrap() > 0.0);
}

#[test]
fn rerunning_a_stage_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    let job = tmp.path().join("job");
    let mock = fx.join("mock.json");
    ok(&aibat(&["render-fixtures", "--out", s(&fx)]));
    let pages = fx.join("123456789");
    let snapshot = |name: &str| std::fs::read(job.join(name)).unwrap();

    ok(&aibat(&["extract", "--input", s(&pages), "--mock", s(&mock), "--out", s(&job)]));
    let first = snapshot("notes.json");
    ok(&aibat(&["extract", "--input", s(&pages), "--mock", s(&mock), "--out", s(&job)]));
    assert_eq!(first, snapshot("notes.json"));

    ok(&aibat(&["parse", "--input", s(&job), "--mock", s(&mock)]));
    let first = snapshot("parsed.json");
    ok(&aibat(&["parse", "--input", s(&job), "--mock", s(&mock)]));
    assert_eq!(first, snapshot("parsed.json"));

    let template = fx.join("template.json");
    let gen = ["generate", "--input", s(&job), "--template", s(&template), "--mock", s(&mock)];
    ok(&aibat(&gen));
    let first = snapshot("generated.json");
    ok(&aibat(&gen));
    assert_eq!(first, snapshot("generated.json"));
}

#[test]
fn generate_without_parsed_notes_is_not_ready() {
    let tmp = tempfile::tempdir().unwrap();
    let template = tmp.path().join("template.json");
    std::fs::write(&template, "{}").unwrap();
    let out = aibat(&["generate", "--input", s(tmp.path()), "--template", s(&template)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage not ready"));
}

#[test]
fn bad_flags_exit_with_usage_status() {
    assert_eq!(aibat(&["extract", "--bogus"]).status.code(), Some(2));
    assert_eq!(aibat(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn invalid_config_exits_with_usage_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"llm": {"max_inflight": 0}}"#).unwrap();
    let out = aibat(&["parse", "--input", s(tmp.path()), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extraction_without_an_ocr_engine_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    ok(&aibat(&["render-fixtures", "--out", s(&fx)]));
    let out = aibat(&["extract", "--input", s(&fx.join("123456789")), "--out", s(&tmp.path().join("job"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no OCR engine"));
}

#[test]
fn schemas_are_written() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&aibat(&["schemas", "--out", s(tmp.path())]));
    let parsed = read(&tmp.path().join("parsed-note.schema.json"));
    assert_eq!(parsed["type"], "object");
    assert!(tmp.path().join("generated-step.schema.json").exists());
}
