//! Deterministic synthetic sessions for tests, benchmarks and demos.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::align::align_session;
use crate::dataset::{aligned_path, to_jsonl, write_clips, Dataset, DatasetError};
use crate::domain::{MiCode, UtteranceId};
use crate::ingest::{write_wav, AudioBuffer, ReferenceUtterance, TimedWord};

const VOCAB: [&str; 32] = [
    "i", "want", "to", "stop", "drinking", "but", "it", "helps", "me", "relax", "after", "work",
    "maybe", "could", "try", "cutting", "down", "weekends", "are", "hard", "my", "wife", "worries",
    "about", "money", "sleep", "better", "when", "walk", "every", "morning", "really",
];

pub const SAMPLE_RATE_HZ: u32 = 16_000;
const WORD_MS: u64 = 300;
const WORD_GAP_MS: u64 = 50;
const TURN_GAP_MS: u64 = 400;

fn hash(seed: u64, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    for p in parts {
        h.update(p.to_be_bytes());
    }
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone)]
pub struct SyntheticSession {
    pub session_id: String,
    pub reference: Vec<ReferenceUtterance>,
    /// ASR words matching the reference exactly.
    pub words: Vec<TimedWord>,
    pub audio: AudioBuffer,
}

/// A session of `utterances` client turns on a millisecond grid with 4 to 9 words each, gold codes
/// drawn from all three classes, and a 16 kHz mono sawtooth track that covers
/// every word.
pub fn session(session_id: &str, utterances: u32, seed: u64) -> SyntheticSession {
    let mut reference = Vec::new();
    let mut words = Vec::new();
    let mut t_ms = 250u64;
    for i in 0..utterances {
        let n = 4 + hash(seed, &[i as u64]) % 6;
        let tokens: Vec<&str> = (0..n)
            .map(|k| VOCAB[(hash(seed, &[i as u64, k]) % VOCAB.len() as u64) as usize])
            .collect();
        for tok in &tokens {
            words.push(TimedWord {
                text: tok.to_string(),
                start_s: t_ms as f64 / 1000.0,
                end_s: (t_ms + WORD_MS) as f64 / 1000.0,
            });
            t_ms += WORD_MS + WORD_GAP_MS;
        }
        t_ms += TURN_GAP_MS;
        reference.push(ReferenceUtterance {
            id: UtteranceId::new(session_id, i),
            speaker: "client".into(),
            text: tokens.join(" "),
            gold_code: MiCode::from_index((hash(seed ^ 0x5eed, &[i as u64]) % 3) as usize),
        });
    }
    let frames = ((t_ms + 500) * SAMPLE_RATE_HZ as u64 / 1000) as usize;
    let samples = (0..frames)
        .map(|n| ((n * 37) % 4000) as i16 - 2000)
        .collect();
    SyntheticSession {
        session_id: session_id.to_string(),
        reference,
        words,
        audio: AudioBuffer::new(SAMPLE_RATE_HZ, 1, samples).expect("valid synthetic audio"),
    }
}

/// Replace every word whose position hashes under `fraction` with a different
/// vocabulary word. Timing is unchanged.
pub fn substitute_words(words: &[TimedWord], fraction: f64, seed: u64) -> Vec<TimedWord> {
    let cut = (fraction.clamp(0.0, 1.0) * 1000.0).round() as u64;
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut w = w.clone();
            if hash(seed, &[i as u64, 1]) % 1000 < cut {
                let pick = hash(seed, &[i as u64, 2]) as usize;
                let replacement = (0..VOCAB.len())
                    .map(|k| VOCAB[(pick + k) % VOCAB.len()])
                    .find(|v| *v != w.text)
                    .expect("vocabulary has alternatives");
                w.text = replacement.to_string();
            }
            w
        })
        .collect()
}

/// Permute word texts across the session while keeping the timestamps.
pub fn shuffle_words(words: &[TimedWord], seed: u64) -> Vec<TimedWord> {
    let mut texts: Vec<(u64, &str)> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (hash(seed, &[i as u64, 3]), w.text.as_str()))
        .collect();
    texts.sort();
    words
        .iter()
        .zip(texts)
        .map(|(w, (_, text))| TimedWord {
            text: text.to_string(),
            ..w.clone()
        })
        .collect()
}

/// `{"words":[...]}` as accepted by the ASR reader.
pub fn asr_json(words: &[TimedWord]) -> Vec<u8> {
    serde_json::to_vec(&serde_json::json!({ "words": words })).expect("words serialize")
}

/// One reference line per utterance, as accepted by the transcript reader.
pub fn reference_jsonl(reference: &[ReferenceUtterance]) -> Vec<u8> {
    let mut out = Vec::new();
    for u in reference {
        let mut line = serde_json::json!({
            "session_id": u.id.session_id,
            "index": u.id.index,
            "speaker": u.speaker,
            "text": u.text,
        });
        if let Some(code) = u.gold_code {
            line["code"] = serde_json::json!(code);
        }
        serde_json::to_writer(&mut out, &line).expect("line serializes");
        out.push(b'\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct SessionFiles {
    pub audio: PathBuf,
    pub asr: PathBuf,
    pub reference: PathBuf,
}

/// Write `<id>.wav`, `<id>.asr.json` and `<id>.ref.jsonl` into `dir`.
pub fn write_session(dir: &Path, s: &SyntheticSession) -> Result<SessionFiles, DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let files = SessionFiles {
        audio: dir.join(format!("{}.wav", s.session_id)),
        asr: dir.join(format!("{}.asr.json", s.session_id)),
        reference: dir.join(format!("{}.ref.jsonl", s.session_id)),
    };
    for (path, bytes) in [
        (&files.audio, write_wav(&s.audio)),
        (&files.asr, asr_json(&s.words)),
        (&files.reference, reference_jsonl(&s.reference)),
    ] {
        fs::write(path, bytes).map_err(|e| DatasetError::io(path, e))?;
    }
    Ok(files)
}

/// Align each session against its own exact ASR, write the aligned records and
/// clips under `dir`, and load the result.
pub fn write_dataset(dir: &Path, sessions: &[SyntheticSession]) -> Result<Dataset, DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    for s in sessions {
        let aligned = align_session(
            &s.session_id,
            &s.words,
            &s.reference,
            Some(s.audio.duration_s()),
        )?;
        let path = aligned_path(dir, &s.session_id);
        fs::write(&path, to_jsonl(&aligned.utterances)).map_err(|e| DatasetError::io(&path, e))?;
        write_clips(dir, &s.audio, &aligned.utterances)?;
    }
    Dataset::load(dir)
}
