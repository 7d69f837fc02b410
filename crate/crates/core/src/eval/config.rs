//! Experiment configurations and the built-in comparison grid.

use serde::{Deserialize, Serialize};

use crate::domain::MiCode;
use crate::gateway::{Modality, PromptId, SamplingParams};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    SelfConsistency,
    /// Exactly one trajectory per utterance; its label is the prediction.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub prompts: Vec<PromptId>,
    pub modality: Modality,
    pub sampling: SamplingParams,
    pub aggregation: Aggregation,
    /// Code used when scoring an utterance whose every response abstained.
    pub unresolved_as: MiCode,
}

/// Names of the built-in configurations, in report order.
pub const BUILTIN_NAMES: [&str; 9] = [
    "direct",
    "cot",
    "mm-sc-audio",
    "mm-sc-text",
    "mm-sc-audio-text",
    "wo-P1",
    "wo-P2",
    "wo-P3",
    "wo-P4",
];

impl RunConfig {
    fn self_consistency(name: &str, prompts: Vec<PromptId>, modality: Modality) -> Self {
        Self {
            name: name.to_string(),
            prompts,
            modality,
            sampling: SamplingParams::default(),
            aggregation: Aggregation::SelfConsistency,
            unresolved_as: MiCode::Fn,
        }
    }

    fn baseline(name: &str, prompt: PromptId) -> Self {
        Self {
            name: name.to_string(),
            prompts: vec![prompt],
            modality: Modality::AudioOnly,
            sampling: SamplingParams {
                samples_per_prompt: 1,
                ..SamplingParams::default()
            },
            aggregation: Aggregation::Single,
            unresolved_as: MiCode::Fn,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let all = PromptId::REASONING.to_vec();
        let without = |p: PromptId| all.iter().copied().filter(|q| *q != p).collect::<Vec<_>>();
        let cfg = match name {
            "direct" => Self::baseline(name, PromptId::Direct),
            "cot" => Self::baseline(name, PromptId::Cot),
            "mm-sc-audio" => Self::self_consistency(name, all, Modality::AudioOnly),
            "mm-sc-text" => Self::self_consistency(name, without(PromptId::P2), Modality::TextOnly),
            "mm-sc-audio-text" => Self::self_consistency(name, all, Modality::AudioAndText),
            "wo-P1" => Self::self_consistency(name, without(PromptId::P1), Modality::AudioOnly),
            "wo-P2" => Self::self_consistency(name, without(PromptId::P2), Modality::AudioOnly),
            "wo-P3" => Self::self_consistency(name, without(PromptId::P3), Modality::AudioOnly),
            "wo-P4" => Self::self_consistency(name, without(PromptId::P4), Modality::AudioOnly),
            _ => return None,
        };
        Some(cfg)
    }

    pub fn builtins() -> Vec<Self> {
        BUILTIN_NAMES
            .iter()
            .map(|n| Self::builtin(n).expect("built-in name"))
            .collect()
    }

    pub fn trajectories_per_utterance(&self) -> usize {
        self.prompts.len() * self.sampling.samples_per_prompt as usize
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |msg: String| Err(EvalError::InvalidConfig(format!("{}: {msg}", self.name)));
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be non-empty and contain no path separators".into());
        }
        if self.prompts.is_empty() {
            return bad("prompt set is empty".into());
        }
        let mut sorted = self.prompts.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.prompts.len() {
            return bad("prompt set lists a prompt twice".into());
        }
        if !self.modality.has_audio() && self.prompts.iter().any(|p| p.requires_audio()) {
            return bad("the prosody-aware prompt P2 needs audio input".into());
        }
        if self.sampling.samples_per_prompt == 0 {
            return bad("samples_per_prompt must be at least 1".into());
        }
        // Negated so NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.sampling.temperature >= 0.0) {
            return bad(format!(
                "temperature {} out of range",
                self.sampling.temperature
            ));
        }
        if !(self.sampling.top_p > 0.0 && self.sampling.top_p <= 1.0) {
            return bad(format!("top_p {} outside (0, 1]", self.sampling.top_p));
        }
        if self.aggregation == Aggregation::Single && self.trajectories_per_utterance() != 1 {
            return bad("single aggregation needs exactly one prompt and one sample".into());
        }
        Ok(())
    }
}
