//! Chat-completions client over HTTP with multimodal content parts.

use std::thread;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{Backend, GatewayError, ModelRequest, SamplingParams};

/// Routing metadata for scripted test servers. Carries no sampling state.
pub const UTTERANCE_HEADER: &str = "x-utterance-id";
pub const PROMPT_HEADER: &str = "x-prompt-id";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: crate::defaults::RETRY_ATTEMPTS,
            base_delay: Duration::from_millis(crate::defaults::RETRY_BASE_DELAY_MS),
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (0-based): base, 2x base, 4x base, ...
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    model_id: String,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// `base_url` is the API root (for example `http://host:8000/v1`);
    /// requests go to `<base_url>/chat/completions`.
    pub fn new(base_url: &str, api_key: Option<String>, model_id: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(
                crate::defaults::REQUEST_TIMEOUT_S,
            )))
            .build()
            .into();
        Self {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.filter(|k| !k.is_empty()),
            model_id: model_id.into(),
            retry: RetryPolicy::default(),
            agent,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &Value, req: &ModelRequest) -> Result<String, Attempt> {
        let mut call = self
            .agent
            .post(&self.endpoint)
            .header(UTTERANCE_HEADER, req.utterance_id.to_string())
            .header(PROMPT_HEADER, req.prompt_id.as_str());
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = call
            .send_json(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(format!("reading body: {e}")))?;
        match status {
            200..=299 => extract_content(&text).map_err(Attempt::Fatal),
            429 | 500..=599 => Attempt::retry(format!("HTTP {status}: {text}")),
            _ => Err(Attempt::Fatal(GatewayError::BackendRejected {
                status,
                body: text,
            })),
        }
    }
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl Attempt {
    fn retry<T>(msg: String) -> Result<T, Attempt> {
        Err(Attempt::Retry(msg))
    }
}

/// Request body: one user message whose content parts are the clip (base64
/// WAV), the transcript, then the instruction.
pub(crate) fn request_body(model_id: &str, req: &ModelRequest, params: &SamplingParams) -> Value {
    let mut parts = Vec::new();
    if let Some(clip) = &req.audio_clip {
        parts.push(json!({
            "type": "input_audio",
            "input_audio": {
                "data": base64::engine::general_purpose::STANDARD.encode(clip.as_slice()),
                "format": "wav",
            }
        }));
    }
    if let Some(text) = &req.transcript_text {
        parts.push(json!({"type": "text", "text": format!("Transcript: {text}")}));
    }
    parts.push(json!({"type": "text", "text": req.instruction_text}));
    json!({
        "model": model_id,
        "temperature": params.temperature,
        "top_p": params.top_p,
        "messages": [{"role": "user", "content": parts}],
    })
}

fn extract_content(text: &str) -> Result<String, GatewayError> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let content = &v["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join("")),
        _ => Err(GatewayError::MalformedResponse(
            "no choices[0].message.content".into(),
        )),
    }
}

impl Backend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(
        &self,
        req: &ModelRequest,
        params: &SamplingParams,
    ) -> Result<String, GatewayError> {
        let body = request_body(&self.model_id, req, params);
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for n in 0..attempts {
            if n > 0 {
                thread::sleep(self.retry.delay(n - 1));
            }
            match self.attempt(&body, req) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::debug!("{}: attempt {} failed: {msg}", req.label(), n + 1);
                    last = msg;
                }
            }
        }
        Err(GatewayError::BackendUnavailable(format!(
            "{} after {attempts} attempts: {last}",
            req.label()
        )))
    }
}
