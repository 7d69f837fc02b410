//! On-disk dataset layout and JSONL helpers.
//!
//! A dataset directory holds one `<session>.aligned.jsonl` per session and
//! the clips cut from it at `<session>/<index>.wav`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::align::{AlignError, AlignedUtterance};
use crate::domain::{MiCode, UtteranceId};
use crate::gateway::UtteranceInput;
use crate::ingest::{slice_audio, write_wav, AudioBuffer, IngestError};

pub const ALIGNED_SUFFIX: &str = ".aligned.jsonl";

/// One JSON document per line, `\n` terminated.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn from_jsonl<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>, IngestError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| IngestError::MalformedInput(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| IngestError::MalformedInput(format!("line {}: {e}", n + 1)))
        })
        .collect()
}

/// Session ids become directory names; keep them to one plain path component.
pub fn check_session_id(session_id: &str) -> Result<(), IngestError> {
    let ok = !session_id.is_empty()
        && session_id != "."
        && session_id != ".."
        && !session_id.contains(['/', '\\', '\0']);
    if ok {
        Ok(())
    } else {
        Err(IngestError::MalformedInput(format!(
            "session id {session_id:?} is not usable as a directory name"
        )))
    }
}

pub fn aligned_path(root: &Path, session_id: &str) -> PathBuf {
    root.join(format!("{session_id}{ALIGNED_SUFFIX}"))
}

pub fn clip_path(root: &Path, id: &UtteranceId) -> PathBuf {
    root.join(&id.session_id).join(format!("{}.wav", id.index))
}

/// Cut and write one clip per utterance under `root`. Returns the paths written.
pub fn write_clips(
    root: &Path,
    audio: &AudioBuffer,
    utterances: &[AlignedUtterance],
) -> Result<Vec<PathBuf>, DatasetError> {
    let mut written = Vec::with_capacity(utterances.len());
    for u in utterances {
        check_session_id(&u.id.session_id)?;
        let clip = slice_audio(audio, u.span)?;
        let path = clip_path(root, &u.id);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
        }
        fs::write(&path, write_wav(&clip)).map_err(|e| DatasetError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Align(#[from] AlignError),
}

impl DatasetError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub aligned: AlignedUtterance,
    pub clip: Option<Arc<Vec<u8>>>,
}

impl DatasetItem {
    /// Client utterances with a gold code are the only ones scored.
    pub fn gold_for_evaluation(&self) -> Option<MiCode> {
        self.aligned.gold_code.filter(|_| self.aligned.is_client())
    }

    pub fn input(&self) -> UtteranceInput {
        UtteranceInput {
            id: self.aligned.id.clone(),
            text: self.aligned.text.clone(),
            clip: self.clip.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    /// Load every `*.aligned.jsonl` in `dir` (sorted by file name) with any
    /// clips present under `dir`.
    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| DatasetError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(ALIGNED_SUFFIX))
            })
            .collect();
        files.sort();
        let mut items = Vec::new();
        for file in files {
            let bytes = fs::read(&file).map_err(|e| DatasetError::io(&file, e))?;
            for aligned in from_jsonl::<AlignedUtterance>(&bytes)? {
                let path = clip_path(dir, &aligned.id);
                let clip = match fs::read(&path) {
                    Ok(b) => Some(Arc::new(b)),
                    Err(e) if e.kind() == io::ErrorKind::NotFound => None,
                    Err(e) => return Err(DatasetError::io(&path, e)),
                };
                items.push(DatasetItem { aligned, clip });
            }
        }
        items.sort_by(|a, b| a.aligned.id.cmp(&b.aligned.id));
        Ok(Self { items })
    }

    pub fn evaluable(&self) -> impl Iterator<Item = (&DatasetItem, MiCode)> {
        self.items
            .iter()
            .filter_map(|i| i.gold_for_evaluation().map(|g| (i, g)))
    }
}
