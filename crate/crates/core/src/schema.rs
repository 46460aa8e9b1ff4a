//! JSON schema documents enforced on model output, and a checker for the
//! draft-07 subset they use (`type`, `properties`, `required`, `items`,
//! `enum`).
//!
//! The same documents are handed to the inference server for constrained
//! decoding, so keep them inside that subset.

use std::fmt;

use serde_json::{json, Map, Value};

use crate::model::{EntityType, SubstepType};

pub const DRAFT_07: &str = "http://json-schema.org/draft-07/schema#";

/// Schema for a parsed note: `steps`, `information`, `entities`.
pub fn parsed_note_schema() -> Value {
    let entity_types: Vec<&str> = EntityType::ALL.iter().map(|t| t.as_str()).collect();
    json!({
        "$schema": DRAFT_07,
        "title": "ParsedNote",
        "type": "object",
        "properties": {
            "steps": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "action": { "type": "string" },
                        "text": { "type": "string" }
                    },
                    "required": ["action", "text"]
                }
            },
            "information": {
                "type": "array",
                "items": { "type": "string" }
            },
            "entities": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "ref": { "type": "string" },
                        "type": { "type": "string", "enum": entity_types }
                    },
                    "required": ["ref", "type"]
                }
            }
        },
        "required": ["steps", "information", "entities"]
    })
}

/// Generic schema for generated substep content (any substep type, free
/// `data`).
pub fn generated_step_schema() -> Value {
    let types: Vec<&str> = [SubstepType::Text, SubstepType::Table, SubstepType::Choice]
        .iter()
        .map(|t| t.as_str())
        .collect();
    json!({
        "$schema": DRAFT_07,
        "title": "GeneratedStep",
        "type": "object",
        "properties": {
            "type": { "type": "string", "enum": types },
            "data": { "type": "string" }
        },
        "required": ["type", "data"]
    })
}

/// Generated-step schema narrowed to one substep: `type` is pinned and, for
/// choose substeps, `data` must be one of `options`.
pub fn generated_step_schema_for(kind: SubstepType, options: Option<&[String]>) -> Value {
    let mut data = json!({ "type": "string" });
    if let Some(options) = options {
        data["enum"] = json!(options);
    }
    json!({
        "$schema": DRAFT_07,
        "title": "GeneratedStep",
        "type": "object",
        "properties": {
            "type": { "type": "string", "enum": [kind.as_str()] },
            "data": data
        },
        "required": ["type", "data"]
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Missing,
    WrongType { expected: String, found: String },
    NotInEnum,
    /// A choose substep's `data` is not byte-identical to any option.
    ChoiceNotVerbatim,
    Invalid(String),
}

/// One failed constraint, located by a `steps[0].text`-style path (`$` is
/// the document root).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl Violation {
    pub fn new(path: impl Into<String>, kind: ViolationKind) -> Self {
        Self {
            path: path.into(),
            kind,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Missing => write!(f, "{}: missing", self.path),
            ViolationKind::WrongType { expected, found } => {
                write!(f, "{}: expected {expected}, found {found}", self.path)
            }
            ViolationKind::NotInEnum => write!(f, "{}: value not in enum", self.path),
            ViolationKind::ChoiceNotVerbatim => {
                write!(f, "{}: choice-not-verbatim", self.path)
            }
            ViolationKind::Invalid(why) => write!(f, "{}: {why}", self.path),
        }
    }
}

/// All violations found while checking one document.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SchemaViolations(pub Vec<Violation>);

impl SchemaViolations {
    pub fn contains(&self, path: &str, kind: &ViolationKind) -> bool {
        self.0.iter().any(|v| v.path == path && &v.kind == kind)
    }

    pub fn is_choice_not_verbatim(&self) -> bool {
        self.0
            .iter()
            .any(|v| v.kind == ViolationKind::ChoiceNotVerbatim)
    }
}

impl fmt::Display for SchemaViolations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "schema violation(s): ")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks `instance` against `schema` and returns every violation.
pub fn check(schema: &Value, instance: &Value) -> Vec<Violation> {
    let mut out = Vec::new();
    check_at(schema, instance, "$", &mut out);
    out
}

fn child_path(parent: &str, key: &str) -> String {
    if parent == "$" {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_i64() || n.is_u64() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn matches_type(expected: &str, v: &Value) -> bool {
    match expected {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "string" => v.is_string(),
        "array" => v.is_array(),
        "object" => v.is_object(),
        "number" => v.is_number(),
        "integer" => match v {
            Value::Number(n) => n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0),
            _ => false,
        },
        _ => false,
    }
}

fn check_at(schema: &Value, instance: &Value, path: &str, out: &mut Vec<Violation>) {
    let Some(schema) = schema.as_object() else {
        return;
    };

    if let Some(expected) = schema.get("type") {
        let allowed: Vec<&str> = match expected {
            Value::String(s) => vec![s.as_str()],
            Value::Array(items) => items.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        if !allowed.is_empty() && !allowed.iter().any(|t| matches_type(t, instance)) {
            out.push(Violation::new(
                path,
                ViolationKind::WrongType {
                    expected: allowed.join("|"),
                    found: type_name(instance).to_string(),
                },
            ));
            return;
        }
    }

    if let Some(Value::Array(allowed)) = schema.get("enum") {
        if !allowed.contains(instance) {
            out.push(Violation::new(path, ViolationKind::NotInEnum));
        }
    }

    if let Value::Object(obj) = instance {
        check_object(schema, obj, path, out);
    }

    if let (Some(items), Value::Array(arr)) = (schema.get("items"), instance) {
        for (i, item) in arr.iter().enumerate() {
            check_at(items, item, &format!("{path}[{i}]"), out);
        }
    }
}

fn check_object(schema: &Map<String, Value>, obj: &Map<String, Value>, path: &str, out: &mut Vec<Violation>) {
    if let Some(Value::Array(required)) = schema.get("required") {
        for key in required.iter().filter_map(Value::as_str) {
            if !obj.contains_key(key) {
                out.push(Violation::new(child_path(path, key), ViolationKind::Missing));
            }
        }
    }
    if let Some(Value::Object(props)) = schema.get("properties") {
        for (key, sub) in props {
            if let Some(value) = obj.get(key) {
                check_at(sub, value, &child_path(path, key), out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_nested_missing_fields() {
        let v = check(&parsed_note_schema(), &json!({"steps": [{"action": "BOND"}]}));
        let paths: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert_eq!(
            paths,
            vec![
                "information: missing",
                "entities: missing",
                "steps[0].text: missing"
            ]
        );
    }

    #[test]
    fn wrong_root_type() {
        let v = check(&parsed_note_schema(), &json!([1, 2]));
        assert_eq!(
            v,
            vec![Violation::new(
                "$",
                ViolationKind::WrongType {
                    expected: "object".into(),
                    found: "array".into()
                }
            )]
        );
    }

    #[test]
    fn enum_and_integer_types() {
        let s = json!({"type": "integer", "enum": [1, 2]});
        assert!(check(&s, &json!(2)).is_empty());
        assert_eq!(check(&s, &json!(3))[0].kind, ViolationKind::NotInEnum);
        assert!(matches!(check(&s, &json!(1.5))[0].kind, ViolationKind::WrongType { .. }));
    }

    #[test]
    fn specialized_schema_pins_options() {
        let opts = vec!["A".to_string(), "B".to_string()];
        let s = generated_step_schema_for(SubstepType::Choice, Some(&opts));
        assert_eq!(s["properties"]["data"]["enum"], json!(["A", "B"]));
        assert!(check(&s, &json!({"type": "choice", "data": "B"})).is_empty());
        assert!(!check(&s, &json!({"type": "choice", "data": "a"})).is_empty());
        assert!(!check(&s, &json!({"type": "text", "data": "A"})).is_empty());
    }
}
