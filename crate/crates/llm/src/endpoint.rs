//! Inference endpoint contract and the HTTP adapter.

use std::time::Duration;

use aibat_core::cost::TokenUsage;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ApiFlavor, LlmConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub json_schema: Value,
    pub temperature: f64,
    pub max_tokens: u32,
    /// 0-based attempt index within one logical call. Not sent over the
    /// wire; deterministic test endpoints key failure injection on it.
    #[serde(skip)]
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EndpointError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    BadResponse(String),
}

pub trait Endpoint: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, EndpointError>;
}

/// Blocking HTTP client for a schema-constrained completion server.
pub struct HttpEndpoint {
    url: String,
    model: String,
    flavor: ApiFlavor,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    pub fn new(cfg: &LlmConfig) -> Result<Self, EndpointError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| EndpointError::Unreachable(e.to_string()))?;
        Ok(Self {
            url: cfg.endpoint_url.trim_end_matches('/').to_string(),
            model: cfg.model_name.clone(),
            flavor: cfg.api,
            client,
        })
    }

    fn request_body(&self, req: &CompletionRequest) -> (String, Value) {
        match self.flavor {
            ApiFlavor::Native => (
                self.url.clone(),
                json!({
                    "model": self.model,
                    "prompt": req.prompt,
                    "json_schema": req.json_schema,
                    "temperature": req.temperature,
                    "max_tokens": req.max_tokens,
                }),
            ),
            ApiFlavor::LlamaCpp => (
                format!("{}/completion", self.url),
                json!({
                    "prompt": req.prompt,
                    "json_schema": req.json_schema,
                    "temperature": req.temperature,
                    "n_predict": req.max_tokens,
                    "stream": false,
                }),
            ),
        }
    }
}

#[derive(Deserialize)]
struct LlamaCppResponse {
    content: String,
    #[serde(default)]
    tokens_evaluated: Option<u64>,
    #[serde(default)]
    tokens_predicted: Option<u64>,
}

impl Endpoint for HttpEndpoint {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, EndpointError> {
        let (url, body) = self.request_body(req);
        let resp = self
            .client
            .post(&url)
            .json(&body)
            .send()
            .map_err(|e| EndpointError::Unreachable(format!("{url}: {e}")))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| EndpointError::BadResponse(e.to_string()))?;
        if !status.is_success() {
            return Err(EndpointError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        match self.flavor {
            ApiFlavor::Native => {
                serde_json::from_str(&text).map_err(|e| EndpointError::BadResponse(format!("{e}: {text}")))
            }
            ApiFlavor::LlamaCpp => {
                let r: LlamaCppResponse =
                    serde_json::from_str(&text).map_err(|e| EndpointError::BadResponse(format!("{e}: {text}")))?;
                let usage = match (r.tokens_evaluated, r.tokens_predicted) {
                    (Some(p), Some(c)) => Some(TokenUsage::new(p, c)),
                    _ => None,
                };
                Ok(CompletionResponse {
                    text: r.content,
                    usage,
                })
            }
        }
    }
}
