use serde::{Deserialize, Serialize};

use crate::domain::{MiCode, TimeSpan, UtteranceId};
use crate::ingest::{ReferenceUtterance, TimedWord};

use super::edit::{align_tokens, alignment_cost, AlignOp, OpKind};
use super::tokens::{token_similarity_credit, tokenize_normalized};
use super::AlignError;

/// Flag set on utterances with no aligned ASR word; their span is interpolated.
pub const FLAG_EMPTY_EVIDENCE: &str = "empty_evidence";

/// Shortest span handed to an interpolated utterance when its neighbours leave no gap.
pub const MIN_SPAN_S: f64 = 0.05;

/// One line of `*.aligned.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedUtterance {
    #[serde(flatten)]
    pub id: UtteranceId,
    pub speaker: String,
    pub text: String,
    #[serde(flatten)]
    pub span: TimeSpan,
    pub token_coverage: f64,
    pub session_score: f64,
    #[serde(default)]
    pub flags: Vec<String>,
    pub gold_code: Option<MiCode>,
}

impl AlignedUtterance {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn is_client(&self) -> bool {
        self.speaker.trim().eq_ignore_ascii_case("client")
    }
}

/// Split ASR words into normalized tokens, one timed entry per token. Words
/// that normalize to nothing vanish; words that split share their timestamps.
pub fn expand_words(words: &[TimedWord]) -> Vec<TimedWord> {
    words
        .iter()
        .flat_map(|w| {
            tokenize_normalized(&w.text).into_iter().map(|t| TimedWord {
                text: t,
                start_s: w.start_s,
                end_s: w.end_s,
            })
        })
        .collect()
}

struct Evidence {
    first: Option<usize>,
    last: Option<usize>,
    credit: f64,
    tokens: usize,
}

/// Project reference utterance boundaries onto ASR timestamps.
///
/// `token_words` must be in one-to-one correspondence with the ASR token
/// sequence the `ops` were computed from (see [`expand_words`]). Reference
/// token ranges come from tokenizing each utterance in order.
pub fn project_spans(
    ops: &[AlignOp],
    token_words: &[TimedWord],
    utterances: &[ReferenceUtterance],
    session_end_s: Option<f64>,
) -> Result<Vec<AlignedUtterance>, AlignError> {
    if token_words.is_empty() {
        let session = utterances
            .first()
            .map(|u| u.id.session_id.clone())
            .unwrap_or_default();
        return Err(AlignError::NoTimedWords(session));
    }
    let ref_tokens: Vec<Vec<String>> = utterances
        .iter()
        .map(|u| tokenize_normalized(&u.text))
        .collect();
    let total_ref: usize = ref_tokens.iter().map(Vec::len).sum();

    // per reference token: aligned ASR index and coverage credit
    let mut aligned_asr: Vec<Option<usize>> = vec![None; total_ref];
    let mut credit = vec![0.0; total_ref];
    let mut inserts = 0usize;
    let flat_ref: Vec<&str> = ref_tokens.iter().flatten().map(String::as_str).collect();
    for op in ops {
        match (op.kind, op.asr_index, op.ref_index) {
            (OpKind::Match | OpKind::Substitute, Some(a), Some(r)) => {
                let word = token_words
                    .get(a)
                    .ok_or(AlignError::Incomplete("ASR tokens"))?;
                let slot = aligned_asr
                    .get_mut(r)
                    .ok_or(AlignError::Incomplete("reference tokens"))?;
                *slot = Some(a);
                credit[r] = if op.kind == OpKind::Match {
                    1.0
                } else {
                    token_similarity_credit(&word.text, flat_ref[r])
                };
            }
            (OpKind::Insert, _, _) => inserts += 1,
            _ => {}
        }
    }

    let mut evidence = Vec::with_capacity(utterances.len());
    let mut offset = 0;
    for toks in &ref_tokens {
        let range = offset..offset + toks.len();
        offset = range.end;
        let hits: Vec<usize> = aligned_asr[range.clone()]
            .iter()
            .flatten()
            .copied()
            .collect();
        evidence.push(Evidence {
            first: hits.iter().copied().min(),
            last: hits.iter().copied().max(),
            credit: credit[range].iter().sum(),
            tokens: toks.len(),
        });
    }

    let denom = total_ref + inserts;
    let session_score = if denom == 0 {
        1.0
    } else {
        credit.iter().sum::<f64>() / denom as f64
    };
    let session_end = session_end_s
        .unwrap_or_else(|| token_words.iter().map(|w| w.end_s).fold(0.0, f64::max))
        .max(MIN_SPAN_S);

    let mut spans: Vec<Option<(f64, f64)>> = evidence
        .iter()
        .map(|e| match (e.first, e.last) {
            (Some(f), Some(l)) => Some((token_words[f].start_s, token_words[l].end_s)),
            _ => None,
        })
        .collect();
    let flagged: Vec<bool> = spans.iter().map(Option::is_none).collect();
    interpolate_gaps(&mut spans, session_end);

    utterances
        .iter()
        .zip(evidence)
        .zip(spans)
        .zip(flagged)
        .map(|(((u, e), span), empty)| {
            let (start, end) = clamp_span(span.unwrap_or((0.0, MIN_SPAN_S)), session_end);
            let token_coverage = if e.tokens == 0 {
                1.0
            } else {
                e.credit / e.tokens as f64
            };
            Ok(AlignedUtterance {
                id: u.id.clone(),
                speaker: u.speaker.clone(),
                text: u.text.clone(),
                span: TimeSpan::new(start, end)?,
                token_coverage,
                session_score,
                flags: if empty {
                    vec![FLAG_EMPTY_EVIDENCE.to_string()]
                } else {
                    Vec::new()
                },
                gold_code: u.gold_code,
            })
        })
        .collect()
}

fn clamp_span((start, end): (f64, f64), session_end: f64) -> (f64, f64) {
    let mut end = end.min(session_end);
    let mut start = start.max(0.0);
    if end <= start {
        end = (start + MIN_SPAN_S).min(session_end);
        if end <= start {
            start = (end - MIN_SPAN_S).max(0.0);
        }
    }
    (start, end)
}

/// Fill runs of missing spans by splitting the gap between the neighbouring
/// anchored spans evenly; when there is no room, stack minimum-length spans
/// at the earlier boundary so starts stay monotone.
fn interpolate_gaps(spans: &mut [Option<(f64, f64)>], session_end: f64) {
    let mut i = 0;
    while i < spans.len() {
        if spans[i].is_some() {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < spans.len() && spans[i].is_none() {
            i += 1;
        }
        let k = (i - run_start) as f64;
        let prev = run_start.checked_sub(1).and_then(|p| spans[p]);
        let next = spans.get(i).copied().flatten();
        let lo = prev.map_or(0.0, |p| p.1);
        let hi = next.map_or(session_end, |n| n.0);
        if hi - lo >= k * MIN_SPAN_S {
            let w = (hi - lo) / k;
            for (n, slot) in spans[run_start..i].iter_mut().enumerate() {
                *slot = Some((lo + n as f64 * w, lo + (n + 1) as f64 * w));
            }
        } else {
            let floor = prev.map_or(0.0, |p| p.0);
            let base = lo.min(hi).max(floor);
            for slot in &mut spans[run_start..i] {
                *slot = Some((base, base + MIN_SPAN_S));
            }
        }
    }
}

/// Result of aligning one session end to end.
#[derive(Debug, Clone)]
pub struct SessionAlignment {
    pub session_id: String,
    pub utterances: Vec<AlignedUtterance>,
    pub ops: Vec<AlignOp>,
    pub cost: usize,
    pub session_score: f64,
}

/// Tokenize, align, and project one session.
pub fn align_session(
    session_id: &str,
    words: &[TimedWord],
    utterances: &[ReferenceUtterance],
    session_end_s: Option<f64>,
) -> Result<SessionAlignment, AlignError> {
    let token_words = expand_words(words);
    if token_words.is_empty() {
        return Err(AlignError::NoTimedWords(session_id.to_string()));
    }
    let asr: Vec<&str> = token_words.iter().map(|w| w.text.as_str()).collect();
    let reference: Vec<String> = utterances
        .iter()
        .flat_map(|u| tokenize_normalized(&u.text))
        .collect();
    let reference: Vec<&str> = reference.iter().map(String::as_str).collect();
    let ops = align_tokens(&asr, &reference);
    let aligned = project_spans(&ops, &token_words, utterances, session_end_s)?;
    let session_score = aligned.first().map_or(1.0, |u| u.session_score);
    Ok(SessionAlignment {
        session_id: session_id.to_string(),
        cost: alignment_cost(&ops),
        utterances: aligned,
        ops,
        session_score,
    })
}
