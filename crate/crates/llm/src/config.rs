use serde::{Deserialize, Serialize};

/// Upper bound on `max_retries`.
pub const MAX_RETRIES_LIMIT: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TokenCounter {
    /// Use the usage block returned by the endpoint, falling back to the
    /// character heuristic when it is missing.
    #[default]
    EndpointReported,
    /// Characters divided by four, rounded up.
    CharsDiv4,
}

/// Wire format spoken by [`crate::HttpEndpoint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ApiFlavor {
    /// `POST <url>` with `{prompt, json_schema, temperature, max_tokens}`,
    /// answered by `{text, usage}`.
    #[default]
    Native,
    /// llama.cpp server: `POST <url>/completion`.
    LlamaCpp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub api: ApiFlavor,
    /// Temperature for the first call and the first retry.
    pub temperature: f64,
    pub max_retries: u32,
    /// Temperature for the second and later retries.
    pub retry_temperature: f64,
    pub max_inflight: usize,
    pub max_tokens: u32,
    pub token_counter: TokenCounter,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8080".into(),
            model_name: "local".into(),
            api: ApiFlavor::Native,
            temperature: 0.0,
            max_retries: 3,
            retry_temperature: 0.2,
            max_inflight: 4,
            max_tokens: 1024,
            token_counter: TokenCounter::EndpointReported,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid LLM config: {0}")]
pub struct LlmConfigError(pub String);

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmConfigError> {
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(LlmConfigError(format!(
                "max_retries must be at most {MAX_RETRIES_LIMIT}, got {}",
                self.max_retries
            )));
        }
        if !(self.temperature >= 0.0) || !(self.retry_temperature >= 0.0) {
            return Err(LlmConfigError("temperatures must be non-negative".into()));
        }
        if self.max_inflight == 0 {
            return Err(LlmConfigError("max_inflight must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmConfigError("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Sampling temperature for 0-based attempt `attempt`.
    pub fn temperature_for(&self, attempt: u32) -> f64 {
        if attempt <= 1 {
            self.temperature
        } else {
            self.retry_temperature
        }
    }
}
