//! Shared vocabulary: the three-way client code, utterance identity and time spans.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("unknown label {0:?}; expected one of CT, ST, FN")]
    UnknownLabel(String),
    #[error("invalid time span [{start_s}, {end_s}): need 0 <= start < end")]
    InvalidSpan { start_s: f64, end_s: f64 },
}

/// Client behaviour code: Change Talk, Sustain Talk, Follow/Neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MiCode {
    Ct,
    St,
    Fn,
}

impl MiCode {
    /// All codes in tie-break priority order.
    pub const ALL: [MiCode; 3] = [MiCode::Ct, MiCode::St, MiCode::Fn];

    pub fn as_str(self) -> &'static str {
        match self {
            MiCode::Ct => "CT",
            MiCode::St => "ST",
            MiCode::Fn => "FN",
        }
    }

    /// Position in `ALL`, used for matrix indexing.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<MiCode> {
        MiCode::ALL.get(i).copied()
    }
}

/// Strict parse of a canonical label. Trims and case-folds; long forms are rejected.
pub fn parse_code(text: &str) -> Result<MiCode, DomainError> {
    match text.trim().to_ascii_uppercase().as_str() {
        "CT" => Ok(MiCode::Ct),
        "ST" => Ok(MiCode::St),
        "FN" => Ok(MiCode::Fn),
        _ => Err(DomainError::UnknownLabel(text.to_string())),
    }
}

impl FromStr for MiCode {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_code(s)
    }
}

impl fmt::Display for MiCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for MiCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MiCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_code(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UtteranceId {
    pub session_id: String,
    pub index: u32,
}

impl UtteranceId {
    pub fn new(session_id: impl Into<String>, index: u32) -> Self {
        Self {
            session_id: session_id.into(),
            index,
        }
    }
}

impl fmt::Display for UtteranceId {
    /// `<session_id>/<index>`, the same shape as the clip path.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.session_id, self.index)
    }
}

/// Half-open interval in seconds with `0 <= start_s < end_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSpan {
    start_s: f64,
    end_s: f64,
}

impl TimeSpan {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, DomainError> {
        if start_s.is_finite() && end_s.is_finite() && start_s >= 0.0 && start_s < end_s {
            Ok(Self { start_s, end_s })
        } else {
            Err(DomainError::InvalidSpan { start_s, end_s })
        }
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

impl<'de> Deserialize<'de> for TimeSpan {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            start_s: f64,
            end_s: f64,
        }
        let raw = Raw::deserialize(d)?;
        TimeSpan::new(raw.start_s, raw.end_s).map_err(serde::de::Error::custom)
    }
}
