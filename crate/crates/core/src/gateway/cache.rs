//! Content-addressed on-disk response cache.
//!
//! One file per key; the filename is the hex digest of
//! `(backend, model_tag, prompt, temperature, max_tokens)` and the content
//! is canonical JSON `{request, text, backend, created_at}`. Writes go
//! through create-then-atomic-rename, so concurrent writers of the same key
//! are benign. A digest mismatch or undecodable entry on read is a hard
//! error, never a silent regeneration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gateway::CompletionRequest;
use crate::ioutil::atomic_write;

/// Cache key over the fields that determine a completion.
pub fn cache_key(backend: &str, request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    for part in [
        backend,
        &request.model_tag,
        &request.prompt,
        &format!("{:?}", request.temperature),
        &request.max_tokens.to_string(),
    ] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: CompletionRequest,
    pub text: String,
    pub backend: String,
    pub created_at: u64,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: &Path) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Read the entry stored under `key`. `Ok(None)` when absent; corruption
    /// (undecodable JSON or a stored request that does not hash back to the
    /// filename) is an explicit error.
    pub fn read(&self, key: &str) -> Result<Option<CacheEntry>> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| {
            Error::CacheCorruption {
                path: path.clone(),
                detail: format!("undecodable entry: {e}"),
            }
        })?;
        let recomputed = cache_key(&entry.backend, &entry.request);
        if recomputed != key {
            return Err(Error::CacheCorruption {
                path,
                detail: format!("stored request hashes to {recomputed}, filename says {key}"),
            });
        }
        Ok(Some(entry))
    }

    pub fn write(&self, key: &str, entry: &CacheEntry) -> Result<()> {
        let path = self.entry_path(key);
        let bytes = serde_json::to_vec(entry).map_err(|e| Error::CacheCorruption {
            path: path.clone(),
            detail: format!("entry serialization failed: {e}"),
        })?;
        atomic_write(&path, &bytes)
    }
}
