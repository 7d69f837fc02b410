//! The six prompt templates and their rendering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

/// Shared task definition, identical in every template.
pub const TASK_DEFINITION: &str = "Task Definition: You are coding one client utterance \
from a motivational interviewing session about alcohol use. Assign exactly one \
motivational interviewing code to the client's utterance. CT (Change Talk): the client's \
language supports change, for example desire, ability, reasons, need, commitment, or steps \
toward changing their drinking. ST (Sustain Talk): the client's language argues against \
change or defends the current behavior. FN (Follow/Neutral): the utterance has no clear \
motivational direction toward or away from change.";

/// Fixed output-format instruction appended to every template.
pub const ANSWER_FOOTER: &str =
    "End your answer with exactly one line: FINAL: CT or FINAL: ST or FINAL: FN.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptId {
    P1,
    P2,
    P3,
    P4,
    #[serde(rename = "DIRECT")]
    Direct,
    #[serde(rename = "COT")]
    Cot,
}

impl PromptId {
    pub const ALL: [PromptId; 6] = [
        PromptId::P1,
        PromptId::P2,
        PromptId::P3,
        PromptId::P4,
        PromptId::Direct,
        PromptId::Cot,
    ];

    /// The four self-consistency prompts.
    pub const REASONING: [PromptId; 4] = [PromptId::P1, PromptId::P2, PromptId::P3, PromptId::P4];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptId::P1 => "P1",
            PromptId::P2 => "P2",
            PromptId::P3 => "P3",
            PromptId::P4 => "P4",
            PromptId::Direct => "DIRECT",
            PromptId::Cot => "COT",
        }
    }

    pub fn method_text(self) -> &'static str {
        match self {
            PromptId::P1 => "Method: Think step by step about the meaning of the utterance and decide whether it reflects CT, ST, or FN.",
            PromptId::P2 => "Method: Paraphrase the utterance and annotate prosodic cues inline (e.g., hesitation, pause, rising tone), then reason about CT/ST/FN using both content and acoustic cues.",
            PromptId::P3 => "Method: Provide step-by-step reasoning and assign independent 1–5 scores to CT, ST, and FN based on observed evidence; choose the highest.",
            PromptId::P4 => "Method: Compare how well the utterance fits CT, ST, and FN by focusing on discriminative evidence; select the best-fitting label.",
            PromptId::Direct => "Method: Directly classify the utterance as CT, ST, or FN without providing reasoning.",
            PromptId::Cot => "Method: Think step by step to decide CT, ST, or FN.",
        }
    }

    pub fn requires_audio(self) -> bool {
        self == PromptId::P2
    }

    pub fn template(self) -> PromptTemplate {
        PromptTemplate {
            id: self,
            task_definition: TASK_DEFINITION,
            method_text: self.method_text(),
            answer_footer: ANSWER_FOOTER,
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptId::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown prompt id {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "audio")]
    AudioOnly,
    #[serde(rename = "text")]
    TextOnly,
    #[serde(rename = "audio-text")]
    AudioAndText,
}

impl Modality {
    pub fn has_audio(self) -> bool {
        matches!(self, Modality::AudioOnly | Modality::AudioAndText)
    }

    pub fn has_text(self) -> bool {
        matches!(self, Modality::TextOnly | Modality::AudioAndText)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::AudioOnly => "audio",
            Modality::TextOnly => "text",
            Modality::AudioAndText => "audio-text",
        }
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "audio" => Ok(Modality::AudioOnly),
            "text" => Ok(Modality::TextOnly),
            "audio-text" | "audio+text" => Ok(Modality::AudioAndText),
            other => Err(format!(
                "unknown modality {other:?}; expected audio, text or audio-text"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub task_definition: &'static str,
    pub method_text: &'static str,
    pub answer_footer: &'static str,
}

impl PromptTemplate {
    fn full_text(&self) -> String {
        format!(
            "{}\n\n{}\n\n{}",
            self.task_definition, self.method_text, self.answer_footer
        )
    }

    /// Short digest of the full template text; part of every cache key so
    /// edits to any template invalidate its cached responses.
    pub fn version(&self) -> String {
        hex::encode(&Sha256::digest(self.full_text().as_bytes())[..6])
    }
}

/// Task definition, method, and footer separated by blank lines.
pub fn render_prompt(
    template: &PromptTemplate,
    modality: Modality,
) -> Result<String, GatewayError> {
    if template.id.requires_audio() && !modality.has_audio() {
        return Err(GatewayError::IncompatibleModality {
            prompt: template.id,
            modality,
        });
    }
    Ok(template.full_text())
}
