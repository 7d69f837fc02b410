//! Response parsing and self-consistent vote aggregation.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{MiCode, UtteranceId};
use crate::gateway::{PromptId, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsePath {
    FinalLine,
    LastMention,
    Abstained,
}

/// Evidence-scoring output, each in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scores {
    pub ct: u8,
    pub st: u8,
    pub fn_: u8,
}

impl Scores {
    /// Unique highest-scoring code, if there is one.
    pub fn argmax(&self) -> Option<MiCode> {
        let v = [self.ct, self.st, self.fn_];
        let max = *v.iter().max()?;
        let mut winners = MiCode::ALL.into_iter().filter(|c| v[c.index()] == max);
        let first = winners.next();
        winners.next().is_none().then_some(first).flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    /// `None` is an abstention.
    pub label: Option<MiCode>,
    pub scores: Option<Scores>,
    pub parse_path: ParsePath,
}

fn final_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"(?i)\bfinal(?:\s+(?:answer|label|code))?\s*[:=\-]\s*[*_"'`(\[]*\s*(CT|ST|FN)\b"#,
        )
        .expect("valid regex")
    })
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(CT|ST|FN)\b").expect("valid regex"))
}

fn score_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(CT|ST|FN)\s*[:=]\s*(\d+)\b").expect("valid regex"))
}

fn code_of(s: &str) -> Option<MiCode> {
    crate::domain::parse_code(s).ok()
}

/// Extract the label: the last `FINAL: <code>` line wins; otherwise the last
/// standalone upper-case `CT`/`ST`/`FN`; otherwise abstain.
pub fn parse_label(raw: &str) -> ParsedResponse {
    let from_final = raw.lines().rev().find_map(|line| {
        final_line_re()
            .captures_iter(line)
            .last()
            .and_then(|c| code_of(&c[1]))
    });
    if let Some(code) = from_final {
        return ParsedResponse {
            label: Some(code),
            scores: None,
            parse_path: ParsePath::FinalLine,
        };
    }
    match mention_re()
        .captures_iter(raw)
        .last()
        .and_then(|c| code_of(&c[1]))
    {
        Some(code) => ParsedResponse {
            label: Some(code),
            scores: None,
            parse_path: ParsePath::LastMention,
        },
        None => ParsedResponse {
            label: None,
            scores: None,
            parse_path: ParsePath::Abstained,
        },
    }
}

/// Last `CT: k`, `ST: k`, `FN: k` values. All three must be present and in 1..=5.
pub fn parse_scores(raw: &str) -> Option<Scores> {
    let mut found: [Option<u64>; 3] = [None; 3];
    for cap in score_re().captures_iter(raw) {
        let code = code_of(&cap[1])?;
        found[code.index()] = Some(cap[2].parse().unwrap_or(u64::MAX));
    }
    let get = |c: MiCode| {
        found[c.index()]
            .filter(|k| (1..=5).contains(k))
            .map(|k| k as u8)
    };
    Some(Scores {
        ct: get(MiCode::Ct)?,
        st: get(MiCode::St)?,
        fn_: get(MiCode::Fn)?,
    })
}

/// Parse a response produced under `prompt`; only evidence-scoring responses carry scores.
pub fn parse_response(raw: &str, prompt: PromptId) -> ParsedResponse {
    let mut parsed = parse_label(raw);
    if prompt == PromptId::P3 {
        parsed.scores = parse_scores(raw);
    }
    parsed
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VoteTally {
    counts: [usize; 3],
    pub abstains: usize,
}

impl VoteTally {
    pub fn from_counts(ct: usize, st: usize, fn_: usize, abstains: usize) -> Self {
        Self {
            counts: [ct, st, fn_],
            abstains,
        }
    }

    pub fn count(&self, code: MiCode) -> usize {
        self.counts[code.index()]
    }

    pub fn add(&mut self, vote: Option<MiCode>) {
        match vote {
            Some(c) => self.counts[c.index()] += 1,
            None => self.abstains += 1,
        }
    }

    pub fn votes(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> usize {
        self.votes() + self.abstains
    }
}

#[derive(Serialize, Deserialize)]
struct TallyWire {
    #[serde(rename = "CT")]
    ct: usize,
    #[serde(rename = "ST")]
    st: usize,
    #[serde(rename = "FN")]
    fn_: usize,
    abstains: usize,
}

impl Serialize for VoteTally {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TallyWire {
            ct: self.counts[0],
            st: self.counts[1],
            fn_: self.counts[2],
            abstains: self.abstains,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VoteTally {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = TallyWire::deserialize(d)?;
        Ok(VoteTally::from_counts(w.ct, w.st, w.fn_, w.abstains))
    }
}

/// Count votes per code; abstentions are tallied separately and never vote.
pub fn tally(parsed: &[ParsedResponse]) -> VoteTally {
    let mut t = VoteTally::default();
    for p in parsed {
        t.add(p.label);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Code(MiCode),
    /// Every trajectory abstained.
    Unresolved,
}

impl Verdict {
    pub fn code(self) -> Option<MiCode> {
        match self {
            Verdict::Code(c) => Some(c),
            Verdict::Unresolved => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Code(c) => c.fmt(f),
            Verdict::Unresolved => f.write_str("UNRESOLVED"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.eq_ignore_ascii_case("unresolved") {
            Ok(Verdict::Unresolved)
        } else {
            crate::domain::parse_code(&s)
                .map(Verdict::Code)
                .map_err(serde::de::Error::custom)
        }
    }
}

/// Majority vote with fixed priority CT > ST > FN among tied maxima.
/// Returns the verdict and whether a tie had to be broken.
pub fn decide(t: &VoteTally) -> (Verdict, bool) {
    let max = t.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return (Verdict::Unresolved, false);
    }
    let mut tied = MiCode::ALL.into_iter().filter(|c| t.count(*c) == max);
    let winner = tied.next().expect("some code attains the max");
    (Verdict::Code(winner), tied.next().is_some())
}

/// One line of `*.pred.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedPrediction {
    #[serde(flatten)]
    pub utterance_id: UtteranceId,
    #[serde(rename = "final")]
    pub verdict: Verdict,
    pub tally: VoteTally,
    pub tie_break_applied: bool,
    /// Evidence-scoring responses whose score argmax disagreed with their FINAL label.
    #[serde(default)]
    pub score_disagreements: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_code: Option<MiCode>,
}

pub fn aggregate(utterance_id: UtteranceId, t: VoteTally) -> AggregatedPrediction {
    let (verdict, tie_break_applied) = decide(&t);
    AggregatedPrediction {
        utterance_id,
        verdict,
        tally: t,
        tie_break_applied,
        score_disagreements: 0,
        gold_code: None,
    }
}

/// Parse, tally and aggregate all trajectories of one utterance.
pub fn code_utterance(
    utterance_id: UtteranceId,
    trajectories: &[Trajectory],
) -> AggregatedPrediction {
    let parsed: Vec<ParsedResponse> = trajectories
        .iter()
        .map(|t| parse_response(&t.raw_response, t.prompt_id))
        .collect();
    let disagreements = parsed
        .iter()
        .filter(|p| match (p.scores.and_then(|s| s.argmax()), p.label) {
            (Some(best), Some(label)) => best != label,
            _ => false,
        })
        .count();
    if disagreements > 0 {
        log::debug!("{utterance_id}: {disagreements} evidence scores disagree with FINAL");
    }
    let mut pred = aggregate(utterance_id, tally(&parsed));
    pred.score_disagreements = disagreements;
    pred
}
