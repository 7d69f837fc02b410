//! Multi-prompt self-consistency coding of motivational interviewing client
//! utterances with an audio-language model.
//!
//! The pipeline runs in five stages: [`ingest`] reads ASR words, reference
//! transcripts and session audio; [`align`] projects reference utterances onto
//! ASR timestamps and cuts clips; [`gateway`] renders prompts and collects
//! model trajectories; [`coder`] turns responses into votes and a final code;
//! [`eval`] scores predictions and runs the built-in experiment grid.

pub mod align;
pub mod coder;
pub mod dataset;
pub mod defaults;
pub mod domain;
pub mod eval;
pub mod exec;
pub mod gateway;
pub mod ingest;
pub mod synth;

pub use domain::{parse_code, DomainError, MiCode, TimeSpan, UtteranceId};
pub use exec::Execution;
