//! Deterministic scripted backend and the replay-only placeholder backend.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{MiCode, UtteranceId};

use super::{Backend, GatewayError, ModelRequest, PromptId, SamplingParams};

/// Scripted responses keyed by utterance (`<session>/<index>`), then by
/// prompt id or `"*"`. Sample `k` gets entry `k % len`.
///
/// ```json
/// {
///   "default": "I cannot determine this.",
///   "utterances": {"s1/0": {"*": ["FINAL: CT"], "P2": ["FINAL: ST", "FINAL: CT"]}},
///   "fail": ["s1/4"]
/// }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default)]
    pub utterances: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    /// Utterance keys, or `<utterance>/<prompt>`, that answer as unavailable.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub fail: BTreeSet<String>,
}

fn unit_hash(parts: &[&str]) -> (f64, u8) {
    let digest = Sha256::digest(parts.join("|").as_bytes());
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(word) as f64 / u64::MAX as f64, digest[8])
}

fn synth_response(prompt: PromptId, label: Option<MiCode>, variant: u8) -> String {
    let Some(code) = label else {
        return "I cannot determine this from the recording.".to_string();
    };
    let reasoning = match prompt {
        PromptId::Direct => String::new(),
        PromptId::P2 => "Paraphrase: the client speaks [pause] with a level tone.\n".to_string(),
        PromptId::P3 => {
            let score = |c: MiCode| {
                if c == code {
                    4
                } else {
                    1 + (variant as usize + c.index()) % 3
                }
            };
            format!(
                "Weighing the evidence.\nCT: {}, ST: {}, FN: {}\n",
                score(MiCode::Ct),
                score(MiCode::St),
                score(MiCode::Fn)
            )
        }
        _ => "Step 1: consider what the client says about drinking.\n".to_string(),
    };
    match variant % 3 {
        0 => format!("{reasoning}FINAL: {code}"),
        1 => format!("{reasoning}**Final: {code}**"),
        _ => format!("{reasoning}FINAL: {code}.\n"),
    }
}

impl MockScript {
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    /// Script every prompt with `samples` responses per utterance. Each response
    /// names the gold code except a hash-selected `flip_rate` share, which name
    /// another code, and (when `flip_rate > 0`) a small share that abstain.
    pub fn from_gold<'a>(
        gold: impl IntoIterator<Item = (&'a UtteranceId, MiCode)>,
        samples: u32,
        flip_rate: f64,
    ) -> Self {
        let mut utterances = BTreeMap::new();
        for (id, code) in gold {
            let key = id.to_string();
            let mut per_prompt = BTreeMap::new();
            for prompt in PromptId::ALL {
                let responses = (0..samples.max(1))
                    .map(|s| {
                        let sample = s.to_string();
                        let (u, byte) = unit_hash(&[&key, prompt.as_str(), &sample]);
                        let label = if u < flip_rate {
                            let others: Vec<_> =
                                MiCode::ALL.into_iter().filter(|c| *c != code).collect();
                            Some(others[byte as usize % 2])
                        } else if flip_rate > 0.0 && u < flip_rate + 0.03 {
                            None
                        } else {
                            Some(code)
                        };
                        synth_response(prompt, label, byte)
                    })
                    .collect();
                per_prompt.insert(prompt.as_str().to_string(), responses);
            }
            utterances.insert(key, per_prompt);
        }
        Self {
            default: None,
            utterances,
            fail: BTreeSet::new(),
        }
    }

    pub fn fails(&self, utterance: &str, prompt: PromptId) -> bool {
        self.fail.contains(utterance) || self.fail.contains(&format!("{utterance}/{prompt}"))
    }

    /// Scripted text for a key, falling back to `default`.
    pub fn response(&self, utterance: &str, prompt: PromptId, sample: usize) -> Option<&str> {
        self.utterances
            .get(utterance)
            .and_then(|m| m.get(prompt.as_str()).or_else(|| m.get("*")))
            .filter(|v| !v.is_empty())
            .map(|v| v[sample % v.len()].as_str())
            .or(self.default.as_deref())
    }

    /// Stable identity of the script, so caches never mix different scripts.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("script serializes");
        hex::encode(&Sha256::digest(&bytes)[..6])
    }
}

/// In-process scripted backend.
#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    model_id: String,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        let model_id = format!("mock-{}", script.digest());
        Self { script, model_id }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl Backend for MockBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(
        &self,
        req: &ModelRequest,
        _params: &SamplingParams,
    ) -> Result<String, GatewayError> {
        let key = req.utterance_id.to_string();
        if self.script.fails(&key, req.prompt_id) {
            return Err(GatewayError::BackendUnavailable(format!(
                "{}: scripted failure",
                req.label()
            )));
        }
        self.script
            .response(&key, req.prompt_id, req.sample_index as usize)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::BackendRejected {
                status: 404,
                body: format!("no scripted response for {}", req.label()),
            })
    }
}

/// Stands in for a backend in replay-only runs; every call is a miss.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    model_id: String,
}

impl ReplayBackend {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
        }
    }
}

impl Backend for ReplayBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(
        &self,
        req: &ModelRequest,
        params: &SamplingParams,
    ) -> Result<String, GatewayError> {
        Err(GatewayError::CacheMiss {
            key: super::cache_key(&self.model_id, req, params),
            request: req.label(),
        })
    }
}
