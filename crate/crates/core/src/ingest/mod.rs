//! Readers for the pipeline's input artifacts and the WAV clip writer.

mod asr;
mod transcript;
mod wav;

pub use asr::{parse_asr_words, TimedWord};
pub use transcript::{parse_reference_transcript, ReferenceUtterance};
pub use wav::{frame_at, read_wav, slice_audio, write_wav, AudioBuffer};

use thiserror::Error;

use crate::domain::DomainError;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("word {index} starts at {start_s}s, before the previous word ({prev_start_s}s)")]
    NonMonotonic {
        index: usize,
        start_s: f64,
        prev_start_s: f64,
    },
    #[error("word {index} ends ({end_s}s) before it starts ({start_s}s)")]
    NegativeSpan {
        index: usize,
        start_s: f64,
        end_s: f64,
    },
    #[error("duplicate utterance index {index} in session {session_id}")]
    DuplicateIndex { session_id: String, index: u32 },
    #[error(transparent)]
    Label(#[from] DomainError),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("span ends at {end_s}s but audio lasts {duration_s}s")]
    SpanOutOfRange { end_s: f64, duration_s: f64 },
}
