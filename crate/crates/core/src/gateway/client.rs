//! Chat-completions client with bounded retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::report::{FieldId, CATEGORY_KEY};

/// How a report is turned into requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// One prompt per report returning the whole record.
    #[default]
    WholeReport,
    /// One prompt per field plus one for the category.
    PerField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL of an OpenAI-compatible server, e.g. `http://127.0.0.1:8000/v1`.
    pub base_url: String,
    pub model_name: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// Ask the server to constrain sampling to the record JSON schema.
    pub structured_mode: bool,
    pub backoff_base_ms: u64,
    pub prompt_mode: PromptMode,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model_name: "cmr-extract".into(),
            timeout_s: 120.0,
            max_retries: 3,
            structured_mode: false,
            backoff_base_ms: 500,
            prompt_mode: PromptMode::WholeReport,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(ConfigError::Invalid(format!("timeout must be > 0, got {}", self.timeout_s)));
        }
        reqwest::Url::parse(&self.base_url)
            .map_err(|e| ConfigError::Invalid(format!("bad endpoint url `{}`: {e}", self.base_url)))?;
        Ok(())
    }

    /// Applies `ENDPOINT_URL`, `MODEL_NAME`, `REQUEST_TIMEOUT_S`,
    /// `MAX_RETRIES` and `STRUCTURED_MODE` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let bad = |k: &str, v: &str| ConfigError::Invalid(format!("{k}={v} is not valid"));
        if let Some(v) = lookup("ENDPOINT_URL") {
            self.base_url = v;
        }
        if let Some(v) = lookup("MODEL_NAME") {
            self.model_name = v;
        }
        if let Some(v) = lookup("REQUEST_TIMEOUT_S") {
            self.timeout_s = v.trim().parse().map_err(|_| bad("REQUEST_TIMEOUT_S", &v))?;
        }
        if let Some(v) = lookup("MAX_RETRIES") {
            self.max_retries = v.trim().parse().map_err(|_| bad("MAX_RETRIES", &v))?;
        }
        if let Some(v) = lookup("STRUCTURED_MODE") {
            self.structured_mode = match v.trim().to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => true,
                "0" | "false" | "no" | "off" | "" => false,
                _ => return Err(bad("STRUCTURED_MODE", &v)),
            };
        }
        self.validate()
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// One completion call.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    /// Index of this sample within its set; lets test doubles draw
    /// independent noise per sample. Not sent over the wire.
    pub sample_index: usize,
    /// JSON schema to enforce, when structured sampling is requested.
    pub schema: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Connection(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response body: {0}")]
    BadResponse(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: Box<TransportError>,
    },
}

impl TransportError {
    fn is_retryable(&self) -> bool {
        match self {
            TransportError::Connection(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Anything that can answer a prompt.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError>;
}

/// JSON schema of a record, for servers that support constrained decoding.
pub fn record_schema() -> Value {
    let mut props = serde_json::Map::new();
    let mut required: Vec<Value> = Vec::new();
    for f in FieldId::ALL {
        props.insert(f.as_str().into(), json!({"type": ["number", "null"], "minimum": 0}));
        required.push(f.as_str().into());
    }
    props.insert(
        CATEGORY_KEY.into(),
        json!({"type": ["string", "null"], "enum": ["CAD", "HCM", "DCM", "Ebstein", "PAH", null]}),
    );
    required.push(CATEGORY_KEY.into());
    json!({
        "type": "object",
        "properties": props,
        "required": required,
        "additionalProperties": false,
    })
}

/// Blocking HTTP backend speaking the chat-completions protocol.
pub struct HttpBackend {
    cfg: EndpointConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: EndpointConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(HttpBackend { cfg, client })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        });
        if let (true, Some(schema)) = (self.cfg.structured_mode, &request.schema) {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": {"name": "cmr_record", "strict": true, "schema": schema},
            });
        }
        body
    }

    fn once(&self, body: &Value) -> Result<String, TransportError> {
        let resp = self
            .client
            .post(self.cfg.completions_url())
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| TransportError::Connection(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| TransportError::Connection(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        extract_content(&text)
    }
}

/// Pulls `choices[0].message.content` out of a chat-completions response.
pub fn extract_content(body: &str) -> Result<String, TransportError> {
    let v: Value = serde_json::from_str(body).map_err(|e| TransportError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::BadResponse("missing choices[0].message.content".into()))
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let body = self.request_body(request);
        let attempts = self.cfg.max_retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.cfg.backoff_base_ms.saturating_mul(1u64 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(TransportError::Exhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt ran")),
        })
    }
}
