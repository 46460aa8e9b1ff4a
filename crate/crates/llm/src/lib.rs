//! Few-shot prompting against a schema-constrained completion endpoint:
//! note parsing, template substep generation, retries and cost tracking.

pub mod config;
pub mod endpoint;
pub mod mock;
pub mod orchestrate;
pub mod prompt;

pub use config::{ApiFlavor, LlmConfig, LlmConfigError, TokenCounter};
pub use endpoint::{CompletionRequest, CompletionResponse, Endpoint, EndpointError, HttpEndpoint};
pub use mock::{input_key, FailureInjection, FailureKind, MockEndpoint, MockLlmEntry};
pub use orchestrate::{
    call_validated, find_placeholders, match_notes_to_step, split_template_step, CallOutcome, DraftDocument,
    GenerateStage, GeneratedRecord, GenerationFailure, LlmError, Orchestrator, ParseStage, ParsedRecord,
    UnparsedNote, PLACEHOLDERS,
};
pub use prompt::{
    build_generation_prompt, build_parse_prompt, ActionLegend, ExampleSets, FewShotExample, PromptBundle,
    RefdesEntry,
};
