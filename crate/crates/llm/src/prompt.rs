//! Few-shot prompt construction for note parsing and substep generation.

use std::collections::BTreeMap;

use aibat_core::schema::{generated_step_schema_for, parsed_note_schema};
use aibat_core::{DrawingNote, NoteType, ParsedNote, SubstepAction, TemplateSubstep};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub const PARSE_INSTRUCTION: &str = "Your task is to take json input and output a parsed version in json.";

pub const GENERATE_INSTRUCTION: &str = "Your job is to take INPUT json and OUTPUT the appropriate json. \
There are 2 main types of actions listed in the ibat_template items that describe what to do: \
(1) update; and (2) choose. For the \"choose\" action, select one item from the list of \
\"options\" and keep the chosen item verbatim.";

const INPUT_MARK: &str = "INPUT:\n";
const OUTPUT_MARK: &str = "OUTPUT:\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefdesEntry {
    /// Designator pattern such as `PRT#`.
    pub prefix: String,
    pub meaning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLegend {
    pub common_actions: Vec<String>,
    pub refdes_legend: Vec<RefdesEntry>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid prompt inputs: {0}")]
pub struct PromptError(pub String);

impl ActionLegend {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.common_actions.is_empty() || self.refdes_legend.is_empty() {
            return Err(PromptError("legend needs at least one action and one designator".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub input: Value,
    pub output: Value,
}

/// Example sets for both calls. Generation examples can be given per
/// substep id; substeps without their own set use `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExampleSets {
    pub parse: Vec<FewShotExample>,
    pub generate: Vec<FewShotExample>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub generate_by_substep: BTreeMap<String, Vec<FewShotExample>>,
}

impl ExampleSets {
    pub fn for_substep(&self, substep_id: &str) -> &[FewShotExample] {
        self.generate_by_substep
            .get(substep_id)
            .filter(|v| !v.is_empty())
            .map_or(&self.generate[..], |v| &v[..])
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.parse.is_empty() || self.generate.is_empty() {
            return Err(PromptError("both example sets need at least one example".into()));
        }
        Ok(())
    }
}

/// Everything sent for one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub prefix: String,
    pub examples: Vec<FewShotExample>,
    pub target_input: Value,
    pub schema: Value,
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

impl PromptBundle {
    /// Prompt text: the prefix, each example as an INPUT/OUTPUT pair, then
    /// the target INPUT followed by an open OUTPUT.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.prefix);
        s.push_str("\n\n");
        for ex in &self.examples {
            s.push_str(INPUT_MARK);
            s.push_str(&pretty(&ex.input));
            s.push('\n');
            s.push_str(OUTPUT_MARK);
            s.push_str(&pretty(&ex.output));
            s.push_str("\n\n");
        }
        s.push_str(INPUT_MARK);
        s.push_str(&pretty(&self.target_input));
        s.push('\n');
        s.push_str(OUTPUT_MARK);
        s
    }
}

/// Recovers the target input from a rendered prompt: the JSON between the
/// last `INPUT:` line and the trailing `OUTPUT:` line.
pub fn target_input_of(prompt: &str) -> Option<Value> {
    let start = prompt.rfind(INPUT_MARK)? + INPUT_MARK.len();
    let body = prompt[start..].strip_suffix(OUTPUT_MARK)?;
    serde_json::from_str(body.trim_end()).ok()
}

/// JSON text with object keys sorted at every level and no whitespace, so
/// equal values always give equal strings.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<&String> = m.keys().collect();
                keys.sort();
                let mut out = Map::new();
                for k in keys {
                    out.insert(k.clone(), sorted(&m[k]));
                }
                Value::Object(out)
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(v)).expect("JSON values always serialize")
}

pub fn parse_prefix(legend: &ActionLegend) -> String {
    let actions: Vec<String> = legend.common_actions.iter().map(|a| format!("\"{a}\"")).collect();
    let mut s = format!(
        "{PARSE_INSTRUCTION}\n\nCommon actions include: {}\n\nThe following are common Reference Designators:",
        actions.join(", ")
    );
    for e in &legend.refdes_legend {
        s.push_str(&format!("\n{} == {}", e.prefix, e.meaning));
    }
    s
}

pub fn parse_target_input(text: &str, note_type: NoteType) -> Value {
    json!({ "note": text, "type": note_type.as_str() })
}

pub fn build_parse_prompt(note: &DrawingNote, legend: &ActionLegend, examples: &[FewShotExample]) -> PromptBundle {
    PromptBundle {
        prefix: parse_prefix(legend),
        examples: examples.to_vec(),
        target_input: parse_target_input(&note.text, note.note_type),
        schema: parsed_note_schema(),
    }
}

/// The `ibat_template` block shown to the model for one substep.
pub fn template_block(substep: &TemplateSubstep) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), json!(substep.kind.as_str()));
    match &substep.action {
        SubstepAction::Update { data } => {
            m.insert("action".into(), json!("update"));
            m.insert("data".into(), json!(data));
        }
        SubstepAction::Choose { options } => {
            m.insert("action".into(), json!("choose"));
            m.insert("options".into(), json!(options));
        }
    }
    if let Some(g) = &substep.guidance {
        m.insert("guidance".into(), json!(g));
    }
    Value::Object(m)
}

pub fn generation_target_input(
    drawing_id: &str,
    note_number: u32,
    note_type: NoteType,
    parsed: &ParsedNote,
    substep: &TemplateSubstep,
) -> Value {
    json!({
        "drawing": drawing_id,
        "note": {
            "note_number": note_number,
            "type": note_type.as_str(),
            "parsed_note": parsed,
        },
        "ibat_template": template_block(substep),
    })
}

pub fn build_generation_prompt(
    drawing_id: &str,
    note_number: u32,
    note_type: NoteType,
    parsed: &ParsedNote,
    substep: &TemplateSubstep,
    examples: &[FewShotExample],
) -> PromptBundle {
    PromptBundle {
        prefix: GENERATE_INSTRUCTION.to_string(),
        examples: examples.to_vec(),
        target_input: generation_target_input(drawing_id, note_number, note_type, parsed, substep),
        schema: generated_step_schema_for(substep.kind, substep.options()),
    }
}
