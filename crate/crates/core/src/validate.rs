//! Gatekeepers between raw model output and the typed domain.

use serde_json::Value;

use crate::model::{GeneratedStep, ParsedNote, SubstepAction, TemplateSubstep};
use crate::schema::{self, SchemaViolations, Violation, ViolationKind};

/// Accepts `candidate` iff it satisfies the parsed-note schema and the
/// domain rules on top of it (uppercase single-token actions, non-empty
/// entity refs).
pub fn validate_parsed_note(candidate: &Value) -> Result<ParsedNote, SchemaViolations> {
    let mut violations = schema::check(&schema::parsed_note_schema(), candidate);
    if !violations.is_empty() {
        return Err(SchemaViolations(violations));
    }
    let note: ParsedNote = serde_json::from_value(candidate.clone()).map_err(|e| {
        SchemaViolations(vec![Violation::new("$", ViolationKind::Invalid(e.to_string()))])
    })?;

    for (i, step) in note.steps.iter().enumerate() {
        if !is_action_token(&step.action) {
            violations.push(Violation::new(
                format!("steps[{i}].action"),
                ViolationKind::Invalid("action must be a non-empty uppercase token".into()),
            ));
        }
    }
    for (i, entity) in note.entities.iter().enumerate() {
        if entity.reference.trim().is_empty() {
            violations.push(Violation::new(
                format!("entities[{i}].ref"),
                ViolationKind::Invalid("entity ref must not be empty".into()),
            ));
        }
    }
    if violations.is_empty() {
        Ok(note)
    } else {
        Err(SchemaViolations(violations))
    }
}

/// Uppercase letters, digits, `-` and `_`, at least one letter.
pub fn is_action_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars().any(|c| c.is_ascii_uppercase())
        && s
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

/// Accepts `candidate` as the content for `source` iff it matches the
/// generated-step schema, carries the source's type, and, for choose
/// substeps, picks one option byte-for-byte.
pub fn validate_generated_step(
    candidate: &Value,
    source: &TemplateSubstep,
) -> Result<GeneratedStep, SchemaViolations> {
    // The option check is done by hand below so that a near-miss choice
    // surfaces as its own error kind rather than a plain enum failure.
    let schema = schema::generated_step_schema_for(source.kind, None);
    let violations = schema::check(&schema, candidate);
    if !violations.is_empty() {
        return Err(SchemaViolations(violations));
    }
    let data = candidate["data"].as_str().unwrap_or_default().to_string();
    if let SubstepAction::Choose { options } = &source.action {
        if !options.iter().any(|o| o.as_bytes() == data.as_bytes()) {
            return Err(SchemaViolations(vec![Violation::new(
                "data",
                ViolationKind::ChoiceNotVerbatim,
            )]));
        }
    }
    Ok(GeneratedStep {
        substep_id: source.substep_id.clone(),
        kind: source.kind,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityType, SubstepType};
    use serde_json::json;

    fn choose(options: &[&str]) -> TemplateSubstep {
        TemplateSubstep {
            substep_id: "S/1".into(),
            kind: SubstepType::Choice,
            action: SubstepAction::Choose {
                options: options.iter().map(|s| s.to_string()).collect(),
            },
            guidance: None,
        }
    }

    #[test]
    fn empty_lists_are_valid() {
        let n = validate_parsed_note(&json!({"steps": [], "information": [], "entities": []})).unwrap();
        assert_eq!(n, ParsedNote::default());
    }

    #[test]
    fn missing_keys_are_enumerated() {
        let err = validate_parsed_note(&json!({"steps": [{"action": "BOND"}]})).unwrap_err();
        assert_eq!(err.0.len(), 3);
        assert!(err.contains("steps[0].text", &ViolationKind::Missing));
        assert!(err.contains("information", &ViolationKind::Missing));
        assert!(err.contains("entities", &ViolationKind::Missing));
    }

    #[test]
    fn rejects_lowercase_action_and_empty_ref() {
        let err = validate_parsed_note(&json!({
            "steps": [{"action": "bond", "text": "x"}],
            "information": [],
            "entities": [{"ref": " ", "type": "item"}]
        }))
        .unwrap_err();
        assert_eq!(err.0.len(), 2);
    }

    #[test]
    fn rejects_unknown_entity_type() {
        let err = validate_parsed_note(&json!({
            "steps": [], "information": [],
            "entities": [{"ref": "J1", "type": "connector"}]
        }))
        .unwrap_err();
        assert!(err.contains("entities[0].type", &ViolationKind::NotInEnum));
    }

    #[test]
    fn entity_types_round_trip() {
        let n = validate_parsed_note(&json!({
            "steps": [], "information": [],
            "entities": [{"ref": "TABLE 4", "type": "table"}]
        }))
        .unwrap();
        assert_eq!(n.entities[0].kind, EntityType::Table);
    }

    #[test]
    fn choice_must_be_verbatim() {
        let src = choose(&["A", "B"]);
        let err = validate_generated_step(&json!({"type": "choice", "data": "a"}), &src).unwrap_err();
        assert!(err.is_choice_not_verbatim());
        let ok = validate_generated_step(&json!({"type": "choice", "data": "B"}), &src).unwrap();
        assert_eq!(ok.data, "B");
        assert_eq!(ok.substep_id, "S/1");
    }

    #[test]
    fn type_must_match_source() {
        let src = choose(&["A", "B"]);
        let err = validate_generated_step(&json!({"type": "text", "data": "A"}), &src).unwrap_err();
        assert!(err.contains("type", &ViolationKind::NotInEnum));
        assert!(!err.is_choice_not_verbatim());
    }

    #[test]
    fn identity_update_is_valid() {
        let src = TemplateSubstep {
            substep_id: "S/2".into(),
            kind: SubstepType::Text,
            action: SubstepAction::Update { data: "KEEP ME".into() },
            guidance: None,
        };
        let g = validate_generated_step(&json!({"type": "text", "data": "KEEP ME"}), &src).unwrap();
        assert_eq!(g.data, "KEEP ME");
    }
}
