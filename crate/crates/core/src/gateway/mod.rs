//! Prompting an inference endpoint and collecting repeated samples.

mod client;
mod mock;
mod prompt;
mod sampling;

pub use client::{
    extract_content, record_schema, CompletionBackend, CompletionRequest, ConfigError,
    EndpointConfig, HttpBackend, PromptMode, TransportError,
};
pub use mock::{mix_seed, mock_extract, text_seed, MockBackend, MockSource, NoiseProfile};
pub use prompt::{
    build_category_prompt, build_field_prompt, build_prompt, report_from_prompt, requested_key,
    strip_code_fence, REPORT_CLOSE, REPORT_OPEN,
};
pub use sampling::{extract_sampled, SampleSet, SamplingConfig};
