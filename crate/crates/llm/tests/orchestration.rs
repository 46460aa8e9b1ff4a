use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use aibat_core::{
    ActionKind, BBox, CropRef, DrawingNote, IbatTemplate, NoteType, ParsedNote, PricingTable, SubstepAction,
    SubstepSpec, SubstepType, TemplateStep, TemplateSubstep,
};
use aibat_llm::prompt::{generation_target_input, parse_target_input};
use aibat_llm::{
    ActionLegend, ApiFlavor, Endpoint, EndpointError, ExampleSets, FailureInjection, FewShotExample, HttpEndpoint,
    LlmConfig, LlmError, MockEndpoint, Orchestrator, ParsedRecord, RefdesEntry,
};
use proptest::prelude::*;
use serde_json::{json, Value};

fn legend() -> ActionLegend {
    ActionLegend {
        common_actions: vec!["SOLDER".into(), "BOND".into()],
        refdes_legend: vec![RefdesEntry {
            prefix: "C#".into(),
            meaning: "capacitor".into(),
        }],
    }
}

fn examples() -> ExampleSets {
    ExampleSets {
        parse: vec![FewShotExample {
            input: json!({"note": "SOLDER C1.", "type": "plain"}),
            output: json!({"steps": [{"action": "SOLDER", "text": "SOLDER C1."}], "information": [], "entities": []}),
        }],
        generate: vec![FewShotExample {
            input: json!({"drawing": "1", "note": {}, "ibat_template": {}}),
            output: json!({"type": "text", "data": "X"}),
        }],
        ..Default::default()
    }
}

fn note(n: u32, text: &str) -> DrawingNote {
    DrawingNote {
        note_number: n,
        note_type: NoteType::Plain,
        text: text.into(),
        crop_ref: CropRef {
            source_id: "D1".into(),
            page_index: 0,
            bbox: BBox::new(0, 0, 10, 10),
            column_index: 0,
            row_order: n,
        },
    }
}

fn parsed_ok() -> Value {
    json!({"steps": [{"action": "BOND", "text": "BOND C1."}], "information": [], "entities": [{"ref": "C1", "type": "reference_designator"}]})
}

#[test]
fn invalid_twice_then_valid_takes_three_attempts() {
    let n = note(1, "BOND C1.");
    let input = parse_target_input(&n.text, n.note_type);
    let mut mock = MockEndpoint::new().fail_first(&input, 2);
    mock.insert(&input, &parsed_ok());
    let cfg = LlmConfig::default();
    let (legend, ex) = (legend(), examples());
    let orch = Orchestrator::new(&mock, &cfg, &legend, &ex);
    let out = orch.parse_note(&n).unwrap();
    assert_eq!(out.attempts, 3);
    assert_eq!(out.value.steps[0].action, "BOND");
    let temps: Vec<f64> = mock.calls().iter().map(|c| c.temperature).collect();
    assert_eq!(temps, vec![0.0, 0.0, 0.2]);
}

#[test]
fn always_invalid_exhausts_after_one_plus_retries() {
    let n = note(1, "BOND C1.");
    let input = parse_target_input(&n.text, n.note_type);
    let mut mock = MockEndpoint::new();
    mock.insert_raw(&input, "not json");
    let cfg = LlmConfig {
        max_retries: 3,
        ..Default::default()
    };
    let (legend, ex) = (legend(), examples());
    let orch = Orchestrator::new(&mock, &cfg, &legend, &ex);
    match orch.parse_note(&n) {
        Err(LlmError::SchemaExhausted { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("{other:?}"),
    }
    assert_eq!(mock.calls().len(), 4);
}

fn update_substep(data: &str) -> TemplateSubstep {
    TemplateSubstep {
        substep_id: "BOND/1".into(),
        kind: SubstepType::Text,
        action: SubstepAction::Update { data: data.into() },
        guidance: None,
    }
}

fn record() -> ParsedRecord {
    ParsedRecord {
        output_id: "note-10".into(),
        note_number: 10,
        note_type: NoteType::Flagged,
        parsed: serde_json::from_value::<ParsedNote>(parsed_ok()).unwrap(),
        attempts: 1,
    }
}

#[test]
fn unresolved_placeholder_gets_one_retry_then_a_warning() {
    let mock = MockEndpoint::new();
    let cfg = LlmConfig::default();
    let (legend, ex) = (legend(), examples());
    let orch = Orchestrator::new(&mock, &cfg, &legend, &ex);
    let sub = update_substep("PER DRAWING NOTE X: BOND USING ITEM X.");
    let out = orch.generate_substep("D1", &record(), &sub).unwrap();
    assert_eq!(out.attempts, 2);
    assert_eq!(out.value.data, "PER DRAWING NOTE X: BOND USING ITEM X.");
    assert_eq!(out.warnings.len(), 1);
    assert!(out.warnings[0].contains("NOTE X"));
}

#[test]
fn resolved_placeholder_needs_no_retry() {
    let sub = update_substep("PER DRAWING NOTE X: BOND.");
    let input = generation_target_input("D1", 10, NoteType::Flagged, &record().parsed, &sub);
    let mut mock = MockEndpoint::new();
    mock.insert(&input, &json!({"type": "text", "data": "PER DRAWING D1 NOTE 10: BOND."}));
    let cfg = LlmConfig::default();
    let (legend, ex) = (legend(), examples());
    let orch = Orchestrator::new(&mock, &cfg, &legend, &ex);
    let out = orch.generate_substep("D1", &record(), &sub).unwrap();
    assert_eq!(out.attempts, 1);
    assert!(out.warnings.is_empty());
}

fn choose_substep(options: &[String]) -> TemplateSubstep {
    TemplateSubstep {
        substep_id: "CURE/1".into(),
        kind: SubstepType::Choice,
        action: SubstepAction::Choose {
            options: options.to_vec(),
        },
        guidance: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Choices come back byte-identical to an option or not at all, and no
    /// call ever exceeds its attempt budget.
    #[test]
    fn choices_stay_verbatim_under_failure_injection(
        options in prop::collection::btree_set("[A-Z][A-Za-z0-9 ]{0,12}", 2..5),
        pick in 0usize..5,
        seed in any::<u64>(),
        rate in 0.0f64..0.9,
        max_retries in 0u32..=5,
    ) {
        let options: Vec<String> = options.into_iter().collect();
        let chosen = options[pick % options.len()].clone();
        let sub = choose_substep(&options);
        let input = generation_target_input("D1", 10, NoteType::Flagged, &record().parsed, &sub);
        let mut mock = MockEndpoint::new().with_failures(FailureInjection { seed, rate, ..Default::default() });
        mock.insert(&input, &json!({"type": "choice", "data": chosen}));
        let cfg = LlmConfig { max_retries, ..Default::default() };
        let (legend, ex) = (legend(), examples());
        let orch = Orchestrator::new(&mock, &cfg, &legend, &ex);
        match orch.generate_substep("D1", &record(), &sub) {
            Ok(out) => {
                prop_assert!(options.iter().any(|o| o.as_bytes() == out.value.data.as_bytes()));
                prop_assert_eq!(&out.value.data, &chosen);
                prop_assert!(out.attempts <= 1 + max_retries);
            }
            Err(LlmError::SchemaExhausted { attempts, .. }) => prop_assert_eq!(attempts, 1 + max_retries),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
        prop_assert!(mock.calls().len() as u32 <= 1 + max_retries);
    }
}

fn template(steps: &[(&str, &[&str], usize)]) -> IbatTemplate {
    IbatTemplate::new(
        "T",
        steps
            .iter()
            .map(|(name, triggers, n)| TemplateStep {
                step_name: name.to_string(),
                trigger_actions: triggers.iter().map(|s| s.to_string()).collect(),
                substeps: (0..*n)
                    .map(|i| SubstepSpec {
                        substep_id: None,
                        kind: SubstepType::Text,
                        action: ActionKind::Update,
                        data: Some(format!("{name} PART {i}")),
                        options: None,
                        guidance: None,
                    })
                    .collect(),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn pipeline_orders_output_and_reports_unmatched_steps() {
    let notes = vec![note(1, "BOND C1."), note(2, "SOLDER C2.")];
    let mut mock = MockEndpoint::new();
    for (n, action) in [(&notes[0], "BOND"), (&notes[1], "SOLDER")] {
        mock.insert(
            &parse_target_input(&n.text, n.note_type),
            &json!({"steps": [{"action": action, "text": n.text}], "information": [], "entities": []}),
        );
    }
    let cfg = LlmConfig {
        max_inflight: 3,
        ..Default::default()
    };
    let (legend, ex) = (legend(), examples());
    let orch = Orchestrator::new(&mock, &cfg, &legend, &ex);
    let t = template(&[("SOLDERING", &["SOLDER"], 2), ("STAKING", &["STAKE"], 1), ("BONDING", &["BOND"], 1)]);
    let doc = orch.run_pipeline("D1", &notes, &t, &PricingTable::default()).unwrap();
    let ids: Vec<&str> = doc.generate.generated.iter().map(|g| g.output_id.as_str()).collect();
    assert_eq!(ids, vec!["SOLDERING/1@2", "SOLDERING/2@2", "BONDING/1@1"]);
    assert_eq!(doc.generate.unmatched_steps, vec!["STAKING"]);
    assert!(doc.cost.total_dollars > 0.0);
    assert_eq!(doc.cost.prompt_tokens, doc.parse.usage.prompt_tokens + doc.generate.usage.prompt_tokens);

    let again = orch.run_pipeline("D1", &notes, &t, &PricingTable::default()).unwrap();
    assert_eq!(serde_json::to_string(&doc).unwrap(), serde_json::to_string(&again).unwrap());
}

#[test]
fn pipeline_fails_only_when_every_note_fails() {
    let notes = vec![note(1, "BOND C1.")];
    let mut mock = MockEndpoint::new();
    mock.insert_raw(&parse_target_input("BOND C1.", NoteType::Plain), "[");
    let cfg = LlmConfig::default();
    let (legend, ex) = (legend(), examples());
    let orch = Orchestrator::new(&mock, &cfg, &legend, &ex);
    let t = template(&[("BONDING", &["BOND"], 1)]);
    assert_eq!(
        orch.run_pipeline("D1", &notes, &t, &PricingTable::default()),
        Err(LlmError::AllNotesUnparsed)
    );
}

/// One-request-per-connection HTTP stub that records request bodies and
/// answers every request with `reply`.
fn stub_server(reply: &'static str, status: u16) -> (String, Arc<Mutex<Vec<(String, Value)>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            log.lock().unwrap().push((path, serde_json::from_slice(&body).unwrap_or(Value::Null)));
            let resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}"), seen)
}

fn request() -> aibat_llm::CompletionRequest {
    aibat_llm::CompletionRequest {
        prompt: "P".into(),
        json_schema: json!({"type": "object"}),
        temperature: 0.2,
        max_tokens: 64,
        attempt: 0,
    }
}

#[test]
fn http_native_contract() {
    let (url, seen) = stub_server(r#"{"text": "{\"a\":1}", "usage": {"prompt_tokens": 7, "completion_tokens": 3}}"#, 200);
    let cfg = LlmConfig {
        endpoint_url: url,
        model_name: "m7".into(),
        ..Default::default()
    };
    let ep = HttpEndpoint::new(&cfg).unwrap();
    let r = ep.complete(&request()).unwrap();
    assert_eq!(r.text, r#"{"a":1}"#);
    assert_eq!(r.usage.unwrap().prompt_tokens, 7);
    let (path, body) = seen.lock().unwrap()[0].clone();
    assert_eq!(path, "/");
    assert_eq!(body["prompt"], "P");
    assert_eq!(body["json_schema"], json!({"type": "object"}));
    assert_eq!(body["temperature"], 0.2);
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["model"], "m7");
    assert!(body.get("attempt").is_none());
}

#[test]
fn http_llama_cpp_contract() {
    let (url, seen) = stub_server(r#"{"content": "{}", "tokens_evaluated": 11, "tokens_predicted": 2}"#, 200);
    let cfg = LlmConfig {
        endpoint_url: url,
        api: ApiFlavor::LlamaCpp,
        ..Default::default()
    };
    let r = HttpEndpoint::new(&cfg).unwrap().complete(&request()).unwrap();
    assert_eq!(r.text, "{}");
    assert_eq!(r.usage.unwrap().completion_tokens, 2);
    let (path, body) = seen.lock().unwrap()[0].clone();
    assert_eq!(path, "/completion");
    assert_eq!(body["n_predict"], 64);
    assert_eq!(body["json_schema"], json!({"type": "object"}));
}

#[test]
fn http_errors() {
    let (url, _) = stub_server(r#"{"error": "boom"}"#, 500);
    let cfg = LlmConfig {
        endpoint_url: url,
        ..Default::default()
    };
    assert!(matches!(
        HttpEndpoint::new(&cfg).unwrap().complete(&request()),
        Err(EndpointError::Status { status: 500, .. })
    ));

    // Nothing listens on a port we just released.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = LlmConfig {
        endpoint_url: format!("http://127.0.0.1:{port}"),
        timeout_secs: 2,
        ..Default::default()
    };
    let ep = HttpEndpoint::new(&cfg).unwrap();
    assert!(matches!(ep.complete(&request()), Err(EndpointError::Unreachable(_))));
    let (legend, ex) = (legend(), examples());
    let orch = Orchestrator::new(&ep, &cfg, &legend, &ex);
    assert!(matches!(orch.parse_note(&note(1, "BOND C1.")), Err(LlmError::Endpoint(_))));
}
