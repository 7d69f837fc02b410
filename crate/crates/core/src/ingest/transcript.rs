use std::collections::BTreeSet;

use serde::Deserialize;

use crate::domain::{parse_code, MiCode, UtteranceId};

use super::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceUtterance {
    pub id: UtteranceId,
    pub speaker: String,
    pub text: String,
    pub gold_code: Option<MiCode>,
}

impl ReferenceUtterance {
    pub fn is_client(&self) -> bool {
        self.speaker.trim().eq_ignore_ascii_case("client")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    session_id: String,
    index: u32,
    speaker: String,
    text: String,
    #[serde(default)]
    code: Option<String>,
}

/// Parse a `*.ref.jsonl` transcript. Blank lines are skipped; output is sorted
/// by `(session_id, index)`.
pub fn parse_reference_transcript(bytes: &[u8]) -> Result<Vec<ReferenceUtterance>, IngestError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| IngestError::MalformedInput(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: Line = serde_json::from_str(line)
            .map_err(|e| IngestError::MalformedInput(format!("line {}: {e}", lineno + 1)))?;
        if raw.text.trim().is_empty() {
            return Err(IngestError::MalformedInput(format!(
                "line {}: empty utterance text",
                lineno + 1
            )));
        }
        if !seen.insert((raw.session_id.clone(), raw.index)) {
            return Err(IngestError::DuplicateIndex {
                session_id: raw.session_id,
                index: raw.index,
            });
        }
        let gold_code = raw.code.as_deref().map(parse_code).transpose()?;
        out.push(ReferenceUtterance {
            id: UtteranceId::new(raw.session_id, raw.index),
            speaker: raw.speaker,
            text: raw.text,
            gold_code,
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}
