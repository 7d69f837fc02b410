//! Content-addressed response cache: `<dir>/<key>.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GatewayError, ModelRequest, SamplingParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request_digest: String,
    pub raw_response: String,
    /// Unix seconds at write time.
    pub timestamp: u64,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    template: &'a str,
    template_version: String,
    utterance: String,
    sample_index: u32,
    temperature: f64,
    top_p: f64,
    modality: &'a str,
}

/// Stable key over everything that determines the distribution of a response.
pub fn cache_key(model_id: &str, req: &ModelRequest, params: &SamplingParams) -> String {
    let material = KeyMaterial {
        model: model_id,
        template: req.prompt_id.as_str(),
        template_version: req.prompt_id.template().version(),
        utterance: req.utterance_id.to_string(),
        sample_index: req.sample_index,
        temperature: params.temperature,
        top_p: params.top_p,
        modality: req.modality.as_str(),
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Digest of the full request payload, including clip bytes and transcript.
/// A cached entry whose digest disagrees with the live request is stale.
pub fn request_digest(key: &str, req: &ModelRequest) -> String {
    let mut h = Sha256::new();
    h.update(key.as_bytes());
    h.update([0]);
    h.update(req.instruction_text.as_bytes());
    h.update([0]);
    if let Some(audio) = &req.audio_clip {
        h.update(audio.as_slice());
    }
    h.update([0]);
    if let Some(t) = &req.transcript_text {
        h.update(t.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Cached response for `key`, if present and written for the same request payload.
    pub fn get(&self, key: &str, digest: &str) -> Option<CacheEntry> {
        let found = fs::read(self.path(key))
            .ok()
            .and_then(|b| serde_json::from_slice::<CacheEntry>(&b).ok())
            .filter(|e| {
                if e.request_digest != digest {
                    log::warn!("stale cache entry {key}: request payload changed");
                    false
                } else {
                    true
                }
            });
        let counter = if found.is_some() {
            &self.hits
        } else {
            &self.misses
        };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    /// Write via a temp file and rename; concurrent writers of one key leave
    /// one complete file behind.
    pub fn put(&self, key: &str, digest: &str, raw_response: &str) -> Result<(), GatewayError> {
        let entry = CacheEntry {
            key: key.to_string(),
            request_digest: digest.to_string(),
            raw_response: raw_response.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let io = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", self.dir.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        serde_json::to_writer_pretty(&mut tmp, &entry)
            .map_err(|e| GatewayError::Cache(e.to_string()))?;
        tmp.write_all(b"\n").map_err(io)?;
        tmp.persist(self.path(key)).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}
