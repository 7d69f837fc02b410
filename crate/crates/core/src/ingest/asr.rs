use serde::{Deserialize, Serialize};

use super::IngestError;

/// One ASR token with its timestamps in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    pub text: String,
    #[serde(rename = "start")]
    pub start_s: f64,
    #[serde(rename = "end")]
    pub end_s: f64,
}

#[derive(Deserialize)]
struct AsrFile {
    words: Vec<TimedWord>,
}

/// Parse a `*.asr.json` document: `{"words": [{"text", "start", "end"}, ...]}`.
///
/// Whitespace-only tokens are dropped after validation.
pub fn parse_asr_words(bytes: &[u8]) -> Result<Vec<TimedWord>, IngestError> {
    let file: AsrFile =
        serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedInput(e.to_string()))?;
    let mut prev_start = f64::NEG_INFINITY;
    for (index, w) in file.words.iter().enumerate() {
        if !w.start_s.is_finite() || !w.end_s.is_finite() || w.start_s < 0.0 {
            return Err(IngestError::MalformedInput(format!(
                "word {index} has invalid timestamps"
            )));
        }
        if w.end_s < w.start_s {
            return Err(IngestError::NegativeSpan {
                index,
                start_s: w.start_s,
                end_s: w.end_s,
            });
        }
        if w.start_s < prev_start {
            return Err(IngestError::NonMonotonic {
                index,
                start_s: w.start_s,
                prev_start_s: prev_start,
            });
        }
        prev_start = w.start_s;
    }
    Ok(file
        .words
        .into_iter()
        .filter(|w| !w.text.trim().is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_words() {
        let words = parse_asr_words(
            br#"{"words":[{"text":"I","start":0.0,"end":0.2},{"text":"drink","start":0.2,"end":0.6}]}"#,
        )
        .unwrap();
        assert_eq!(words.len(), 2);
        assert_eq!(words[1].text, "drink");
        assert_eq!(words[1].start_s, 0.2);
        assert_eq!(words[1].end_s, 0.6);
    }

    #[test]
    fn empty_words() {
        assert!(parse_asr_words(br#"{"words":[]}"#).unwrap().is_empty());
    }

    #[test]
    fn negative_span() {
        let err = parse_asr_words(br#"{"words":[{"text":"a","start":1.0,"end":0.5}]}"#);
        assert!(matches!(
            err,
            Err(IngestError::NegativeSpan { index: 0, .. })
        ));
    }

    #[test]
    fn non_monotonic() {
        let err = parse_asr_words(
            br#"{"words":[{"text":"a","start":1.0,"end":1.5},{"text":"b","start":0.5,"end":0.9}]}"#,
        );
        assert!(matches!(
            err,
            Err(IngestError::NonMonotonic { index: 1, .. })
        ));
    }

    #[test]
    fn malformed() {
        assert!(matches!(
            parse_asr_words(b"nope"),
            Err(IngestError::MalformedInput(_))
        ));
        assert!(matches!(
            parse_asr_words(br#"{"words":[{"text":"a","start":0.0}]}"#),
            Err(IngestError::MalformedInput(_))
        ));
        assert!(matches!(
            parse_asr_words(br#"{}"#),
            Err(IngestError::MalformedInput(_))
        ));
    }

    #[test]
    fn whitespace_tokens_dropped() {
        let words = parse_asr_words(
            br#"{"words":[{"text":" ","start":0.0,"end":0.1},{"text":"ok","start":0.1,"end":0.3}]}"#,
        )
        .unwrap();
        assert_eq!(words.len(), 1);
        assert_eq!(words[0].text, "ok");
    }
}
