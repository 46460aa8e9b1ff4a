//! Schema-checked calls with retries, and the parse/generate pipeline.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aibat_core::cost::{estimate_cost, TokenUsage};
use aibat_core::validate::{validate_generated_step, validate_parsed_note};
use aibat_core::{
    CostEstimate, DrawingNote, GeneratedStep, IbatTemplate, ModelError, NoteType, ParsedNote, PricingTable,
    SubstepAction, TemplateStep, TemplateSubstep,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{LlmConfig, TokenCounter};
use crate::endpoint::{CompletionRequest, Endpoint, EndpointError};
use crate::mock::approx_tokens;
use crate::prompt::{build_generation_prompt, build_parse_prompt, ActionLegend, ExampleSets, PromptBundle};

/// Template placeholders that must not survive into generated text.
pub const PLACEHOLDERS: [&str; 3] = ["NOTE X", "ITEM X", "DRAWING X"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("no valid output after {attempts} attempts; last problem: {last}")]
    SchemaExhausted { attempts: u32, last: String },
    #[error(transparent)]
    Template(#[from] ModelError),
    #[error("every note failed to parse")]
    AllNotesUnparsed,
    #[error("nothing to do: {0}")]
    EmptyInput(&'static str),
}

/// A validated result plus call bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CallOutcome<T> {
    pub value: T,
    pub attempts: u32,
    pub usage: TokenUsage,
    pub warnings: Vec<String>,
}

/// Placeholder tokens present in `text`, matched on word boundaries.
pub fn find_placeholders(text: &str) -> Vec<&'static str> {
    PLACEHOLDERS
        .iter()
        .copied()
        .filter(|p| {
            text.match_indices(p).any(|(i, _)| {
                let before = text[..i].chars().next_back();
                let after = text[i + p.len()..].chars().next();
                !before.is_some_and(|c| c.is_alphanumeric()) && !after.is_some_and(|c| c.is_alphanumeric())
            })
        })
        .collect()
}

fn count_usage(cfg: &LlmConfig, prompt: &str, text: &str, reported: Option<TokenUsage>) -> TokenUsage {
    match (cfg.token_counter, reported) {
        (TokenCounter::EndpointReported, Some(u)) => u,
        _ => TokenUsage::new(approx_tokens(prompt), approx_tokens(text)),
    }
}

/// Sends `bundle` until `validate` accepts an answer, at most
/// `1 + max_retries` times. Endpoint errors end the call at once.
///
/// When `needs_redo` flags an accepted answer, one more attempt is made; the
/// redo's answer wins only if it validates and is not flagged itself,
/// otherwise the first answer is kept with the flag as a warning.
pub fn call_validated<T>(
    endpoint: &dyn Endpoint,
    cfg: &LlmConfig,
    bundle: &PromptBundle,
    validate: impl Fn(&Value) -> Result<T, String>,
    needs_redo: impl Fn(&T) -> Option<String>,
) -> Result<CallOutcome<T>, LlmError> {
    let prompt = bundle.render();
    let mut usage = TokenUsage::default();
    let mut attempt = 0u32;
    let send = |attempt: u32, usage: &mut TokenUsage| -> Result<Result<T, String>, LlmError> {
        let req = CompletionRequest {
            prompt: prompt.clone(),
            json_schema: bundle.schema.clone(),
            temperature: cfg.temperature_for(attempt),
            max_tokens: cfg.max_tokens,
            attempt,
        };
        let resp = endpoint.complete(&req)?;
        *usage += count_usage(cfg, &prompt, &resp.text, resp.usage);
        Ok(match serde_json::from_str::<Value>(&resp.text) {
            Ok(v) => validate(&v),
            Err(e) => Err(format!("invalid JSON: {e}")),
        })
    };

    let mut last = String::new();
    let budget = 1 + cfg.max_retries;
    while attempt < budget {
        let result = send(attempt, &mut usage)?;
        attempt += 1;
        match result {
            Ok(value) => {
                let Some(problem) = needs_redo(&value) else {
                    return Ok(CallOutcome {
                        value,
                        attempts: attempt,
                        usage,
                        warnings: Vec::new(),
                    });
                };
                let redo = send(attempt, &mut usage)?;
                attempt += 1;
                if let Ok(v) = redo {
                    if needs_redo(&v).is_none() {
                        return Ok(CallOutcome {
                            value: v,
                            attempts: attempt,
                            usage,
                            warnings: Vec::new(),
                        });
                    }
                }
                return Ok(CallOutcome {
                    value,
                    attempts: attempt,
                    usage,
                    warnings: vec![problem],
                });
            }
            Err(problem) => {
                tracing::debug!(attempt, %problem, "rejected model output");
                last = problem;
            }
        }
    }
    Err(LlmError::SchemaExhausted { attempts: attempt, last })
}

fn describe(v: &aibat_core::schema::SchemaViolations) -> String {
    v.to_string()
}

/// Substeps of one template step, ids assigned as `<step_name>/<ordinal>`
/// counting from 1.
pub fn split_template_step(step: &TemplateStep) -> Result<Vec<TemplateSubstep>, ModelError> {
    step.substeps
        .iter()
        .enumerate()
        .map(|(i, spec)| spec.clone().into_substep(format!("{}/{}", step.step_name, i + 1)))
        .collect()
}

/// A note as it goes into generation: its identity and parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRecord {
    pub output_id: String,
    pub note_number: u32,
    pub note_type: NoteType,
    pub parsed: ParsedNote,
    pub attempts: u32,
}

impl ParsedRecord {
    pub fn output_id_for(note_number: u32) -> String {
        format!("note-{note_number}")
    }
}

/// Records having at least one step whose action triggers `step`, in input
/// order, each at most once.
pub fn match_notes_to_step<'a>(step: &TemplateStep, notes: &'a [ParsedRecord]) -> Vec<&'a ParsedRecord> {
    notes
        .iter()
        .filter(|r| step.trigger_actions.iter().any(|a| r.parsed.has_action(a)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnparsedNote {
    pub note_number: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedRecord {
    pub output_id: String,
    pub step_name: String,
    pub note_number: u32,
    pub step: GeneratedStep,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GeneratedRecord {
    pub fn output_id_for(substep_id: &str, note_number: u32) -> String {
        format!("{substep_id}@{note_number}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub substep_id: String,
    pub note_number: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseStage {
    pub parsed: Vec<ParsedRecord>,
    pub unparsed: Vec<UnparsedNote>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateStage {
    pub generated: Vec<GeneratedRecord>,
    pub unmatched_steps: Vec<String>,
    pub failures: Vec<GenerationFailure>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftDocument {
    pub drawing_id: String,
    pub template_id: String,
    pub parse: ParseStage,
    pub generate: GenerateStage,
    pub cost: CostEstimate,
}

/// Runs `f` over `items` with at most `limit` calls in flight, returning
/// results in input order.
pub fn run_ordered<I: Sync, R: Send>(items: &[I], limit: usize, f: impl Fn(&I) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let workers = limit.clamp(1, items.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every item ran"))
        .collect()
}

/// Shared context for every call of one run.
pub struct Orchestrator<'a> {
    pub endpoint: &'a dyn Endpoint,
    pub cfg: &'a LlmConfig,
    pub legend: &'a ActionLegend,
    pub examples: &'a ExampleSets,
}

impl<'a> Orchestrator<'a> {
    pub fn new(
        endpoint: &'a dyn Endpoint,
        cfg: &'a LlmConfig,
        legend: &'a ActionLegend,
        examples: &'a ExampleSets,
    ) -> Self {
        Self {
            endpoint,
            cfg,
            legend,
            examples,
        }
    }

    pub fn parse_note(&self, note: &DrawingNote) -> Result<CallOutcome<ParsedNote>, LlmError> {
        let bundle = build_parse_prompt(note, self.legend, &self.examples.parse);
        call_validated(
            self.endpoint,
            self.cfg,
            &bundle,
            |v| validate_parsed_note(v).map_err(|e| describe(&e)),
            |_| None,
        )
    }

    pub fn generate_substep(
        &self,
        drawing_id: &str,
        note: &ParsedRecord,
        substep: &TemplateSubstep,
    ) -> Result<CallOutcome<GeneratedStep>, LlmError> {
        let bundle = build_generation_prompt(
            drawing_id,
            note.note_number,
            note.note_type,
            &note.parsed,
            substep,
            self.examples.for_substep(&substep.substep_id),
        );
        let is_update = matches!(substep.action, SubstepAction::Update { .. });
        call_validated(
            self.endpoint,
            self.cfg,
            &bundle,
            |v| validate_generated_step(v, substep).map_err(|e| describe(&e)),
            |g: &GeneratedStep| {
                let found = find_placeholders(&g.data);
                (is_update && !found.is_empty())
                    .then(|| format!("placeholder unresolved: {}", found.join(", ")))
            },
        )
    }

    /// Parses every note; failures are recorded, not fatal.
    pub fn parse_notes(&self, notes: &[DrawingNote]) -> ParseStage {
        let usage = Mutex::new(TokenUsage::default());
        let results = run_ordered(notes, self.cfg.max_inflight, |note| {
            let r = self.parse_note(note);
            if let Ok(o) = &r {
                *usage.lock().expect("usage") += o.usage;
            }
            r
        });
        let mut stage = ParseStage {
            parsed: Vec::new(),
            unparsed: Vec::new(),
            usage: TokenUsage::default(),
        };
        for (note, r) in notes.iter().zip(results) {
            match r {
                Ok(o) => stage.parsed.push(ParsedRecord {
                    output_id: ParsedRecord::output_id_for(note.note_number),
                    note_number: note.note_number,
                    note_type: note.note_type,
                    parsed: o.value,
                    attempts: o.attempts,
                }),
                Err(e) => stage.unparsed.push(UnparsedNote {
                    note_number: note.note_number,
                    error: e.to_string(),
                }),
            }
        }
        stage.usage = usage.into_inner().expect("usage");
        stage
    }

    /// Fills every substep of every template step for each matching note,
    /// in template order then note order.
    pub fn generate_steps(
        &self,
        drawing_id: &str,
        parsed: &[ParsedRecord],
        template: &IbatTemplate,
    ) -> Result<GenerateStage, LlmError> {
        let mut jobs: Vec<(&str, &ParsedRecord, TemplateSubstep)> = Vec::new();
        let mut unmatched_steps = Vec::new();
        for step in &template.steps {
            let substeps = split_template_step(step)?;
            let matched = match_notes_to_step(step, parsed);
            if matched.is_empty() {
                unmatched_steps.push(step.step_name.clone());
            }
            for note in matched {
                for sub in &substeps {
                    jobs.push((&step.step_name, note, sub.clone()));
                }
            }
        }
        let usage = Mutex::new(TokenUsage::default());
        let results = run_ordered(&jobs, self.cfg.max_inflight, |(_, note, sub)| {
            let r = self.generate_substep(drawing_id, note, sub);
            if let Ok(o) = &r {
                *usage.lock().expect("usage") += o.usage;
            }
            r
        });
        let mut stage = GenerateStage {
            generated: Vec::new(),
            unmatched_steps,
            failures: Vec::new(),
            usage: TokenUsage::default(),
        };
        for ((step_name, note, sub), r) in jobs.iter().zip(results) {
            match r {
                Ok(o) => stage.generated.push(GeneratedRecord {
                    output_id: GeneratedRecord::output_id_for(&sub.substep_id, note.note_number),
                    step_name: step_name.to_string(),
                    note_number: note.note_number,
                    step: o.value,
                    attempts: o.attempts,
                    warnings: o.warnings,
                }),
                Err(e) => stage.failures.push(GenerationFailure {
                    substep_id: sub.substep_id.clone(),
                    note_number: note.note_number,
                    error: e.to_string(),
                }),
            }
        }
        stage.usage = usage.into_inner().expect("usage");
        Ok(stage)
    }

    /// Parse then generate, with the combined token cost.
    pub fn run_pipeline(
        &self,
        drawing_id: &str,
        notes: &[DrawingNote],
        template: &IbatTemplate,
        pricing: &PricingTable,
    ) -> Result<DraftDocument, LlmError> {
        if notes.is_empty() {
            return Err(LlmError::EmptyInput("no notes"));
        }
        if template.steps.is_empty() {
            return Err(LlmError::EmptyInput("template has no steps"));
        }
        let parse = self.parse_notes(notes);
        if parse.parsed.is_empty() {
            return Err(LlmError::AllNotesUnparsed);
        }
        let generate = self.generate_steps(drawing_id, &parse.parsed, template)?;
        let total = parse.usage + generate.usage;
        Ok(DraftDocument {
            drawing_id: drawing_id.to_string(),
            template_id: template.template_id.clone(),
            cost: estimate_cost(total.prompt_tokens, total.completion_tokens, pricing),
            parse,
            generate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aibat_core::{ActionKind, ParsedStep, SubstepSpec, SubstepType};

    #[test]
    fn placeholder_scan_respects_word_edges() {
        assert_eq!(find_placeholders("PER DRAWING NOTE X: BOND"), vec!["NOTE X"]);
        assert_eq!(find_placeholders("USING ITEM X."), vec!["ITEM X"]);
        assert!(find_placeholders("PER NOTE XY AND ITEM X1").is_empty());
        assert!(find_placeholders("PER DRAWING 123 NOTE 10").is_empty());
    }

    fn spec(action: ActionKind, data: Option<&str>, options: Option<&[&str]>) -> SubstepSpec {
        SubstepSpec {
            substep_id: None,
            kind: SubstepType::Text,
            action,
            data: data.map(str::to_string),
            options: options.map(|o| o.iter().map(|s| s.to_string()).collect()),
            guidance: None,
        }
    }

    #[test]
    fn split_assigns_ordinal_ids() {
        let step = TemplateStep {
            step_name: "UNDERFILL".into(),
            trigger_actions: vec!["UNDERFILL".into()],
            substeps: vec![
                spec(ActionKind::Update, Some("APPLY UNDERFILL"), None),
                spec(ActionKind::Update, Some("| REF DES |"), None),
                spec(ActionKind::Choose, None, Some(&["CURE 1 HR", "CURE 2 HR"])),
            ],
        };
        let subs = split_template_step(&step).unwrap();
        let ids: Vec<&str> = subs.iter().map(|s| s.substep_id.as_str()).collect();
        assert_eq!(ids, vec!["UNDERFILL/1", "UNDERFILL/2", "UNDERFILL/3"]);

        let bad = TemplateStep {
            substeps: vec![spec(ActionKind::Update, Some("X"), Some(&["A", "B"]))],
            ..step
        };
        assert!(matches!(
            split_template_step(&bad),
            Err(ModelError::MalformedSubstep { .. })
        ));
    }

    fn record(n: u32, actions: &[&str]) -> ParsedRecord {
        ParsedRecord {
            output_id: ParsedRecord::output_id_for(n),
            note_number: n,
            note_type: NoteType::Plain,
            parsed: ParsedNote {
                steps: actions
                    .iter()
                    .map(|a| ParsedStep {
                        action: a.to_string(),
                        text: a.to_string(),
                    })
                    .collect(),
                information: vec![],
                entities: vec![],
            },
            attempts: 1,
        }
    }

    #[test]
    fn matching_by_trigger_actions() {
        let notes = vec![record(1, &["BOND"]), record(2, &["SOLDER"]), record(3, &["BOND", "STAKE"])];
        let step = |t: &[&str]| TemplateStep {
            step_name: "S".into(),
            trigger_actions: t.iter().map(|s| s.to_string()).collect(),
            substeps: vec![],
        };
        let got: Vec<u32> = match_notes_to_step(&step(&["BOND"]), &notes).iter().map(|r| r.note_number).collect();
        assert_eq!(got, vec![1, 3]);
        let got: Vec<u32> = match_notes_to_step(&step(&["BOND", "STAKE"]), &notes)
            .iter()
            .map(|r| r.note_number)
            .collect();
        assert_eq!(got, vec![1, 3]);
        assert!(match_notes_to_step(&step(&["CLEAN"]), &notes).is_empty());
    }

    #[test]
    fn run_ordered_keeps_input_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = run_ordered(&items, 7, |&i| {
            std::thread::sleep(std::time::Duration::from_micros((50 - i) * 20));
            i * 2
        });
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
    }
}
