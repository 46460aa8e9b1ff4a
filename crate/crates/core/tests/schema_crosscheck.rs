//! The hand-written schema checker must agree with an independent draft-07
//! implementation on a corpus of mutated parse outputs.

use aibat_core::schema::{self, parsed_note_schema};
use aibat_core::validate::validate_parsed_note;
use serde_json::{json, Value};

fn base() -> Value {
    json!({
        "steps": [
            { "action": "REMOVE", "text": "REMOVE REF DES LISTED IN TABLE 4." },
            { "action": "BOND", "text": "BOND ITEM 8\n(CIP) TO ITEM 1 (PWB) USING ITEM 7 (EC 55/9)..." }
        ],
        "information": [
            "OPTIMAL WIRE\nROUTING TO BE DETERMINED PER MANUFACTURING,\nPACKAGING OR COGNIZANT ENGINEER DISCRETION."
        ],
        "entities": [
            { "ref": "REF DES LISTED IN TABLE 4", "type": "reference_designator" },
            { "ref": "TABLE 4", "type": "table" },
            { "ref": "ITEM 8\n(CIP)", "type": "item" },
            { "ref": "ITEM 1 (PWB)", "type": "item" },
            { "ref": "ITEM 7 (EC 55/9)", "type": "item" }
        ]
    })
}

type Mutation = fn(&mut Value);

fn mutations() -> Vec<(&'static str, Mutation)> {
    vec![
        ("drop steps", |v| {
            v.as_object_mut().unwrap().remove("steps");
        }),
        ("drop information", |v| {
            v.as_object_mut().unwrap().remove("information");
        }),
        ("drop entities", |v| {
            v.as_object_mut().unwrap().remove("entities");
        }),
        ("steps as string", |v| v["steps"] = json!("REMOVE")),
        ("steps as object", |v| v["steps"] = json!({})),
        ("steps null", |v| v["steps"] = Value::Null),
        ("information as string", |v| v["information"] = json!("x")),
        ("entities as number", |v| v["entities"] = json!(3)),
        ("step text missing", |v| {
            v["steps"][0].as_object_mut().unwrap().remove("text");
        }),
        ("step action missing", |v| {
            v["steps"][1].as_object_mut().unwrap().remove("action");
        }),
        ("step action number", |v| v["steps"][0]["action"] = json!(7)),
        ("step text array", |v| v["steps"][1]["text"] = json!(["a"])),
        ("step is string", |v| v["steps"][0] = json!("REMOVE")),
        ("information item number", |v| v["information"][0] = json!(1.5)),
        ("information item null", |v| {
            v["information"].as_array_mut().unwrap().push(Value::Null)
        }),
        ("entity ref missing", |v| {
            v["entities"][2].as_object_mut().unwrap().remove("ref");
        }),
        ("entity type missing", |v| {
            v["entities"][0].as_object_mut().unwrap().remove("type");
        }),
        ("entity type unknown", |v| v["entities"][1]["type"] = json!("connector")),
        ("entity type uppercase", |v| v["entities"][1]["type"] = json!("TABLE")),
        ("entity type number", |v| v["entities"][3]["type"] = json!(1)),
        ("entity ref bool", |v| v["entities"][4]["ref"] = json!(true)),
        ("entity type material", |v| v["entities"][3]["type"] = json!("material")),
        ("entity type document", |v| v["entities"][4]["type"] = json!("document")),
        ("empty lists", |v| *v = json!({"steps": [], "information": [], "entities": []})),
        ("extra root key", |v| v["confidence"] = json!(0.9)),
        ("extra step key", |v| v["steps"][0]["note"] = json!("x")),
        ("root array", |v| *v = json!([v.clone()])),
        ("root string", |v| *v = json!("steps")),
    ]
}

fn corpus() -> Vec<(String, Value)> {
    let muts = mutations();
    let mut out = Vec::new();
    for (name, m) in &muts {
        let mut v = base();
        m(&mut v);
        out.push((name.to_string(), v));
    }
    let mut i = 0;
    while out.len() < 50 {
        let (a, ma) = &muts[i % muts.len()];
        let (b, mb) = &muts[(i * 7 + 3) % muts.len()];
        i += 1;
        if a == b {
            continue;
        }
        let mut v = base();
        ma(&mut v);
        // Later mutations index into the structure; skip combos whose first
        // step destroyed it.
        if !v.is_object() {
            continue;
        }
        let r = std::panic::catch_unwind(|| {
            let mut w = v.clone();
            mb(&mut w);
            w
        });
        if let Ok(w) = r {
            out.push((format!("{a} + {b}"), w));
        }
    }
    out
}

#[test]
fn hand_checker_agrees_with_reference_validator() {
    let schema = parsed_note_schema();
    let reference = jsonschema::draft7::new(&schema).expect("schema compiles");
    let cases = corpus();
    assert_eq!(cases.len(), 50);
    let mut accepted = 0;
    for (name, value) in &cases {
        let expected = reference.is_valid(value);
        let ours = schema::check(&schema, value).is_empty();
        let validated = validate_parsed_note(value).is_ok();
        assert_eq!(ours, expected, "checker disagrees on {name}: {value}");
        assert_eq!(validated, expected, "validator disagrees on {name}: {value}");
        accepted += usize::from(expected);
    }
    // Both outcomes must be represented for the comparison to mean anything.
    assert!(accepted >= 5 && accepted <= 45, "accepted {accepted}");
}

#[test]
fn unmodified_output_is_valid() {
    let note = validate_parsed_note(&base()).unwrap();
    assert_eq!(note.steps[0].action, "REMOVE");
    assert_eq!(note.entities[1].reference, "TABLE 4");
}

#[test]
fn emitted_generated_schema_compiles() {
    jsonschema::draft7::new(&schema::generated_step_schema()).unwrap();
    let opts = vec!["A".to_string(), "B".to_string()];
    let s = schema::generated_step_schema_for(aibat_core::SubstepType::Choice, Some(&opts));
    let v = jsonschema::draft7::new(&s).unwrap();
    assert!(v.is_valid(&json!({"type": "choice", "data": "A"})));
    assert!(!v.is_valid(&json!({"type": "choice", "data": "a"})));
}
