//! Model gateway: prompt rendering, request construction, backend dispatch,
//! response caching and trajectory collection.

mod cache;
mod http;
mod mock;
mod prompt;
mod server;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::UtteranceId;
use crate::exec::Execution;

pub use cache::{cache_key, request_digest, CacheEntry, ResponseCache};
pub use http::{HttpBackend, RetryPolicy, PROMPT_HEADER, UTTERANCE_HEADER};
pub use mock::{MockBackend, MockScript, ReplayBackend};
pub use prompt::{
    render_prompt, Modality, PromptId, PromptTemplate, ANSWER_FOOTER, TASK_DEFINITION,
};
pub use server::MockServer;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("prompt {prompt} cannot be used with {} input", modality.as_str())]
    IncompatibleModality {
        prompt: PromptId,
        modality: Modality,
    },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend rejected request (HTTP {status}): {body}")]
    BackendRejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("replay cache has no entry {key} for {request}")]
    CacheMiss { key: String, request: String },
    #[error("cache error: {0}")]
    Cache(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    /// Failures attributable to the backend or its cache rather than to input data.
    pub fn is_backend_failure(&self) -> bool {
        !matches!(
            self,
            GatewayError::IncompatibleModality { .. } | GatewayError::InvalidRequest(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub samples_per_prompt: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: crate::defaults::TEMPERATURE,
            top_p: crate::defaults::TOP_P,
            samples_per_prompt: crate::defaults::SAMPLES_PER_PROMPT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub utterance_id: UtteranceId,
    pub prompt_id: PromptId,
    /// Bookkeeping only; never sent to the backend.
    pub sample_index: u32,
    pub modality: Modality,
    pub instruction_text: String,
    pub audio_clip: Option<Arc<Vec<u8>>>,
    pub transcript_text: Option<String>,
}

impl ModelRequest {
    /// Build a request, enforcing that audio and transcript are present exactly
    /// when the modality calls for them.
    pub fn new(
        utterance_id: UtteranceId,
        prompt_id: PromptId,
        sample_index: u32,
        modality: Modality,
        audio_clip: Option<Arc<Vec<u8>>>,
        transcript_text: Option<String>,
    ) -> Result<Self, GatewayError> {
        let instruction_text = render_prompt(&prompt_id.template(), modality)?;
        if modality.has_audio() != audio_clip.is_some() {
            return Err(GatewayError::InvalidRequest(format!(
                "{utterance_id}: audio clip {} for {} input",
                if audio_clip.is_some() {
                    "present"
                } else {
                    "missing"
                },
                modality.as_str()
            )));
        }
        if modality.has_text() != transcript_text.is_some() {
            return Err(GatewayError::InvalidRequest(format!(
                "{utterance_id}: transcript {} for {} input",
                if transcript_text.is_some() {
                    "present"
                } else {
                    "missing"
                },
                modality.as_str()
            )));
        }
        Ok(Self {
            utterance_id,
            prompt_id,
            sample_index,
            modality,
            instruction_text,
            audio_clip,
            transcript_text,
        })
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}",
            self.utterance_id, self.prompt_id, self.sample_index
        )
    }
}

/// One line of `*.traj.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(flatten)]
    pub utterance_id: UtteranceId,
    pub prompt_id: PromptId,
    pub sample_index: u32,
    pub raw_response: String,
    pub backend_id: String,
    pub cached: bool,
}

/// A model endpoint. `model_id` feeds the cache key.
pub trait Backend: Send + Sync {
    fn model_id(&self) -> &str;

    fn complete(&self, req: &ModelRequest, params: &SamplingParams)
        -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CacheMode {
    /// No cache; every query reaches the backend.
    Off,
    /// Serve hits from the cache, persist misses after the backend answers.
    #[default]
    ReadWrite,
    /// Never contact the backend; a miss is an error.
    ReplayOnly,
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    mode: CacheMode,
    concurrency: usize,
    exec: Execution,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.model_id())
            .field("cache", &self.cache.as_ref().map(ResponseCache::dir))
            .field("mode", &self.mode)
            .field("concurrency", &self.concurrency)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            cache: None,
            mode: CacheMode::Off,
            concurrency: crate::defaults::CONCURRENCY,
            exec: Execution::default(),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache, mode: CacheMode) -> Self {
        self.cache = Some(cache);
        self.mode = mode;
        self
    }

    pub fn with_concurrency(mut self, concurrency: usize) -> Self {
        self.concurrency = concurrency.max(1);
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.model_id()
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn query(
        &self,
        req: &ModelRequest,
        params: &SamplingParams,
    ) -> Result<Trajectory, GatewayError> {
        let trajectory = |raw_response: String, cached: bool| Trajectory {
            utterance_id: req.utterance_id.clone(),
            prompt_id: req.prompt_id,
            sample_index: req.sample_index,
            raw_response,
            backend_id: self.backend.model_id().to_string(),
            cached,
        };
        let cache = match (self.mode, &self.cache) {
            (CacheMode::Off, _) | (_, None) => {
                if self.mode == CacheMode::ReplayOnly {
                    return Err(GatewayError::Cache("replay-only mode needs a cache".into()));
                }
                return self
                    .backend
                    .complete(req, params)
                    .map(|r| trajectory(r, false));
            }
            (_, Some(c)) => c,
        };
        let key = cache_key(self.backend.model_id(), req, params);
        let digest = request_digest(&key, req);
        if let Some(hit) = cache.get(&key, &digest) {
            return Ok(trajectory(hit.raw_response, true));
        }
        if self.mode == CacheMode::ReplayOnly {
            return Err(GatewayError::CacheMiss {
                key,
                request: req.label(),
            });
        }
        let raw = self.backend.complete(req, params)?;
        cache.put(&key, &digest, &raw)?;
        Ok(trajectory(raw, false))
    }

    /// Run many requests with at most `concurrency` in flight. Results line up
    /// with `requests` regardless of completion order.
    pub fn query_all(
        &self,
        requests: &[ModelRequest],
        params: &SamplingParams,
    ) -> Vec<Result<Trajectory, GatewayError>> {
        self.exec
            .map_bounded(self.concurrency, requests, |r| self.query(r, params))
    }
}

/// Inputs for one utterance: its transcript text and, when available, its WAV clip.
#[derive(Debug, Clone)]
pub struct UtteranceInput {
    pub id: UtteranceId,
    pub text: String,
    pub clip: Option<Arc<Vec<u8>>>,
}

/// Requests for every (prompt, sample) pair, ordered by prompt then sample.
pub fn plan_requests(
    input: &UtteranceInput,
    prompts: &[PromptId],
    modality: Modality,
    params: &SamplingParams,
) -> Result<Vec<ModelRequest>, GatewayError> {
    let mut prompts = prompts.to_vec();
    prompts.sort();
    prompts.dedup();
    let audio = if modality.has_audio() {
        Some(input.clip.clone().ok_or_else(|| {
            GatewayError::InvalidRequest(format!("{}: no audio clip available", input.id))
        })?)
    } else {
        None
    };
    let text = modality.has_text().then(|| input.text.clone());
    let mut out = Vec::with_capacity(prompts.len() * params.samples_per_prompt as usize);
    for p in prompts {
        for s in 0..params.samples_per_prompt {
            out.push(ModelRequest::new(
                input.id.clone(),
                p,
                s,
                modality,
                audio.clone(),
                text.clone(),
            )?);
        }
    }
    Ok(out)
}

/// Per-trajectory failures of one collection.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} of {total} trajectories failed; first: {}", failures.len(), failures.first().map(|(k, e)| format!("{k}: {e}")).unwrap_or_default())]
pub struct FailedTrajectories {
    pub total: usize,
    pub failures: Vec<(String, GatewayError)>,
}

/// Exactly `|prompts| x samples_per_prompt` results in (prompt, sample) order;
/// a failed request occupies its slot as an error.
pub fn collect_trajectories(
    gateway: &Gateway,
    input: &UtteranceInput,
    prompts: &[PromptId],
    modality: Modality,
    params: &SamplingParams,
) -> Result<Vec<Result<Trajectory, GatewayError>>, GatewayError> {
    let requests = plan_requests(input, prompts, modality, params)?;
    Ok(gateway.query_all(&requests, params))
}

/// Split collected results into trajectories or a failure report.
pub fn into_complete(
    results: Vec<Result<Trajectory, GatewayError>>,
    labels: &[String],
) -> Result<Vec<Trajectory>, FailedTrajectories> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (r, label) in results.into_iter().zip(labels) {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => failures.push((label.clone(), e)),
        }
    }
    if failures.is_empty() {
        Ok(ok)
    } else {
        Err(FailedTrajectories { total, failures })
    }
}
