//! The published parse and generation examples, with elided list items
//! dropped so they are valid JSON.

use aibat_core::{NoteType, ParsedNote, SubstepSpec, SubstepType, ActionKind, TemplateSubstep};
use serde_json::{json, Value};

pub const PARSE_EXAMPLE_NOTE: &str = "REMOVE REF DES LISTED IN TABLE 4. BOND ITEM 8\n(CIP) TO ITEM 1 (PWB) USING ITEM 7 (EC 55/9) ... OPTIMAL WIRE\nROUTING TO BE DETERMINED PER MANUFACTURING,\nPACKAGING OR COGNIZANT ENGINEER DISCRETION.";
pub const PARSE_EXAMPLE_TYPE: NoteType = NoteType::Flagged;

pub fn parse_example_input() -> Value {
    json!({ "note": PARSE_EXAMPLE_NOTE, "type": "flagged" })
}

pub fn parse_example_output() -> Value {
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

pub const GENERATION_EXAMPLE_DRAWING: &str = "123456789";
pub const GENERATION_EXAMPLE_NOTE_NUMBER: u32 = 10;
pub const GENERATION_EXAMPLE_TYPE: NoteType = NoteType::Flagged;
pub const BOND_STEP_TEXT: &str =
    "BOND TEMP SENSOR PRT1, PRT2 TO ITEM 1\n(PWB) WITH ITEM 5 (THERMALLY CONDUCTIVE\nMATERIAL).";

pub const BONDING_TEMPLATE_DATA: &str = "BONDING PRTs\n\nPER DRAWING NOTE X: BOND PRT CERAMIC/WHITE SIDE DOWN AT APPROXIMATE LOCATION SHOWN USING ADHESIVE ITEM X. SERIAL NUMBERS SHOULD BE VISIBLE ON THE TOP SIDE.\nNOTE: DO NOT REMOVE PRT LABEL.\n\nNOTE: IF PACKAGING OF PRT IS SERIALIZED AND THE PRT DOES NOT HAVE THE S/N ON IT, INK STAMP S/N ON PRT.";

pub const BONDING_OUTPUT_DATA: &str = "BONDING PRTs\n\nPER DRAWING 123456789 NOTE 10: BOND PRT1 & PRT2, CERAMIC/WHITE SIDE DOWN AT APPROXIMATE LOCATION SHOWN USING ITEM 5 (THERMALLY CONDUCTIVE MATERIAL). SERIAL NUMBERS SHOULD BE VISIBLE ON THE TOP SIDE.\n\nNOTE: DO NOT REMOVE PRT LABEL.\n\nNOTE: IF PACKAGING OF PRT IS SERIALIZED AND THE PRT DOES NOT HAVE THE S/N ON IT, INK STAMP S/N ON PRT.";

pub fn generation_example_parsed() -> ParsedNote {
    serde_json::from_value(json!({
        "steps": [ { "action": "BOND", "text": BOND_STEP_TEXT } ],
        "information": [],
        "entities": [
            { "ref": "TEMP SENSOR PRT1", "type": "reference_designator" },
            { "ref": "PRT2", "type": "reference_designator" }
        ]
    }))
    .expect("example parse is well formed")
}

pub fn bonding_substep_spec() -> SubstepSpec {
    SubstepSpec {
        substep_id: None,
        kind: SubstepType::Text,
        action: ActionKind::Update,
        data: Some(BONDING_TEMPLATE_DATA.into()),
        options: None,
        guidance: None,
    }
}

pub fn bonding_substep(substep_id: &str) -> TemplateSubstep {
    bonding_substep_spec()
        .into_substep(substep_id.into())
        .expect("example substep is well formed")
}

pub fn generation_example_input() -> Value {
    json!({
        "drawing": GENERATION_EXAMPLE_DRAWING,
        "note": {
            "note_number": GENERATION_EXAMPLE_NOTE_NUMBER,
            "type": "flagged",
            "parsed_note": generation_example_parsed(),
        },
        "ibat_template": {
            "type": "text",
            "action": "update",
            "data": BONDING_TEMPLATE_DATA,
        }
    })
}

pub fn generation_example_output() -> Value {
    json!({ "type": "text", "data": BONDING_OUTPUT_DATA })
}

#[cfg(test)]
mod tests {
    use super::*;
    use aibat_core::schema::{check, generated_step_schema_for, parsed_note_schema};

    #[test]
    fn examples_satisfy_their_schemas() {
        assert!(check(&parsed_note_schema(), &parse_example_output()).is_empty());
        assert!(check(&generated_step_schema_for(SubstepType::Text, None), &generation_example_output()).is_empty());
        let p: ParsedNote = serde_json::from_value(parse_example_output()).unwrap();
        assert_eq!(p.steps.len(), 2);
        assert_eq!(p.entities.len(), 5);
    }

    #[test]
    fn generation_input_matches_prompt_builder() {
        let sub = bonding_substep("BONDING PRTs/1");
        let built = aibat_llm::prompt::generation_target_input(
            GENERATION_EXAMPLE_DRAWING,
            GENERATION_EXAMPLE_NOTE_NUMBER,
            GENERATION_EXAMPLE_TYPE,
            &generation_example_parsed(),
            &sub,
        );
        assert_eq!(built, generation_example_input());
    }
}
