//! Forced alignment of ASR words onto reference utterances.
//!
//! Reference text and ASR output are normalized into token streams, aligned
//! globally under unit edit costs, and each reference utterance inherits the
//! timestamps of the ASR words aligned inside its token range.

mod edit;
mod project;
mod qc;
mod tokens;

pub use edit::{align_tokens, alignment_cost, replay, AlignOp, OpKind};
pub use project::{
    align_session, expand_words, project_spans, AlignedUtterance, SessionAlignment,
    FLAG_EMPTY_EVIDENCE, MIN_SPAN_S,
};
pub use qc::{apply_qc, qc_filter, QcDecision, QcScope};
pub use tokens::{token_similarity_credit, tokenize_normalized, FUZZY_MAX_DISTANCE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("session {0} has no timed ASR words")]
    NoTimedWords(String),
    #[error("alignment does not cover {0}")]
    Incomplete(&'static str),
    #[error(transparent)]
    Span(#[from] crate::domain::DomainError),
}
