//! Deterministic offline endpoint answering from a table of canned outputs.

use std::collections::BTreeMap;
use std::sync::Mutex;

use aibat_core::cost::TokenUsage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::endpoint::{CompletionRequest, CompletionResponse, Endpoint, EndpointError};
use crate::prompt::{canonical_json, target_input_of};

/// Lookup key of a target input: SHA-256 of its canonical JSON, hex.
pub fn input_key(target_input: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(target_input).as_bytes()))
}

/// Characters divided by four, rounded up.
pub fn approx_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockLlmEntry {
    pub input: Value,
    pub output: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FailureInjection {
    pub seed: u64,
    /// Probability that any one attempt returns a bad answer.
    pub rate: f64,
    /// Input key to number of leading attempts that must fail.
    pub fail_first: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// Truncated, unparseable JSON.
    InvalidJson,
    /// Parseable JSON missing required fields.
    SchemaViolation,
    /// A choice that differs from the offered option only in case or
    /// whitespace; falls back to a schema violation for other prompts.
    NearMissChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockCall {
    pub key: String,
    pub attempt: u32,
    pub temperature: f64,
    pub injected: Option<FailureKind>,
}

#[derive(Debug, Default)]
pub struct MockEndpoint {
    responses: BTreeMap<String, String>,
    failures: FailureInjection,
    calls: Mutex<Vec<MockCall>>,
}

impl MockEndpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: &[MockLlmEntry]) -> Self {
        let mut m = Self::new();
        for e in entries {
            m.insert(&e.input, &e.output);
        }
        m
    }

    pub fn insert(&mut self, input: &Value, output: &Value) {
        self.responses
            .insert(input_key(input), serde_json::to_string(output).expect("JSON serializes"));
    }

    /// Canned raw text, for answers that are not JSON at all.
    pub fn insert_raw(&mut self, input: &Value, text: impl Into<String>) {
        self.responses.insert(input_key(input), text.into());
    }

    pub fn with_failures(mut self, failures: FailureInjection) -> Self {
        self.failures = failures;
        self
    }

    pub fn fail_first(mut self, input: &Value, attempts: u32) -> Self {
        self.failures.fail_first.insert(input_key(input), attempts);
        self
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().expect("mock call log").clone()
    }

    fn injected(&self, key: &str, attempt: u32) -> Option<FailureKind> {
        let scripted = self.failures.fail_first.get(key).copied().unwrap_or(0);
        let mut seed_material = Sha256::new();
        seed_material.update(self.failures.seed.to_le_bytes());
        seed_material.update(key.as_bytes());
        seed_material.update(attempt.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed_material.finalize().into());
        let roll: f64 = rng.random();
        let kind = match rng.random_range(0..3u8) {
            0 => FailureKind::InvalidJson,
            1 => FailureKind::SchemaViolation,
            _ => FailureKind::NearMissChoice,
        };
        if attempt < scripted {
            return Some(if attempt % 2 == 0 {
                FailureKind::InvalidJson
            } else {
                FailureKind::SchemaViolation
            });
        }
        (roll < self.failures.rate).then_some(kind)
    }

    fn fallback(target: &Value) -> String {
        if let Some(t) = target.get("ibat_template") {
            let data = t
                .get("data")
                .cloned()
                .or_else(|| t.get("options").and_then(|o| o.get(0)).cloned())
                .unwrap_or(Value::Null);
            return json!({"type": t["type"], "data": data}).to_string();
        }
        if let Some(note) = target.get("note").and_then(Value::as_str) {
            return json!({"steps": [], "information": [note], "entities": []}).to_string();
        }
        "{}".into()
    }

    fn bad_answer(kind: FailureKind, req: &CompletionRequest, good: &str) -> String {
        match kind {
            FailureKind::InvalidJson => good.chars().take(good.chars().count() / 2).collect(),
            FailureKind::SchemaViolation => "{}".into(),
            FailureKind::NearMissChoice => {
                let options = req.json_schema["properties"]["data"]["enum"].as_array();
                match options.and_then(|o| o.first()).and_then(Value::as_str) {
                    Some(first) => {
                        let lower = first.to_lowercase();
                        let near = if lower == first { format!("{first} ") } else { lower };
                        let kind = &req.json_schema["properties"]["type"]["enum"][0];
                        json!({"type": kind, "data": near}).to_string()
                    }
                    None => "{}".into(),
                }
            }
        }
    }
}

impl Endpoint for MockEndpoint {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, EndpointError> {
        let target = target_input_of(&req.prompt)
            .ok_or_else(|| EndpointError::BadResponse("prompt has no INPUT block".into()))?;
        let key = input_key(&target);
        let good = self
            .responses
            .get(&key)
            .cloned()
            .unwrap_or_else(|| Self::fallback(&target));
        let injected = self.injected(&key, req.attempt);
        let text = match injected {
            Some(kind) => Self::bad_answer(kind, req, &good),
            None => good,
        };
        self.calls.lock().expect("mock call log").push(MockCall {
            key,
            attempt: req.attempt,
            temperature: req.temperature,
            injected,
        });
        let usage = TokenUsage::new(approx_tokens(&req.prompt), approx_tokens(&text));
        Ok(CompletionResponse {
            text,
            usage: Some(usage),
        })
    }
}
