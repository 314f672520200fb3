//! On-disk request/response cassettes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{replay_key, ChatBackend, ChatRequest, ChatResponse, GatewayError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub request_digest: String,
    pub response_text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl CassetteEntry {
    fn into_response(self) -> ChatResponse {
        ChatResponse {
            text: self.response_text,
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
            latency: Duration::ZERO,
        }
    }
}

/// A directory of `{replay_key}.json` files.
#[derive(Debug, Clone)]
pub struct CassetteStore {
    dir: PathBuf,
}

impl CassetteStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<CassetteEntry>, GatewayError> {
        let path = self.path_for(key);
        let raw = match std::fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Cassette(format!("{}: {e}", path.display()))),
        };
        let entry: CassetteEntry = serde_json::from_slice(&raw)
            .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        if entry.request_digest != key {
            return Err(GatewayError::Cassette(format!(
                "{}: digest {} does not match file name",
                path.display(),
                entry.request_digest
            )));
        }
        Ok(Some(entry))
    }

    /// Writes to a temporary file in the same directory, then renames it into
    /// place, so readers never observe a partial cassette.
    pub fn save(&self, entry: &CassetteEntry) -> Result<(), GatewayError> {
        let err = |e: &dyn std::fmt::Display| {
            GatewayError::Cassette(format!("{}: {e}", self.dir.display()))
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| err(&e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| err(&e))?;
        serde_json::to_writer_pretty(&mut tmp, entry).map_err(|e| err(&e))?;
        tmp.write_all(b"\n").map_err(|e| err(&e))?;
        tmp.persist(self.path_for(&entry.request_digest))
            .map_err(|e| err(&e))?;
        Ok(())
    }

    /// Every cassette key present in the directory, sorted.
    pub fn keys(&self) -> Result<Vec<String>, GatewayError> {
        let mut keys = Vec::new();
        let entries = match std::fs::read_dir(&self.dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(keys),
            Err(e) => return Err(GatewayError::Cassette(e.to_string())),
        };
        for entry in entries {
            let entry = entry.map_err(|e| GatewayError::Cassette(e.to_string()))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(key) = name.strip_suffix(".json") {
                keys.push(key.to_string());
            }
        }
        keys.sort();
        Ok(keys)
    }
}

/// Serves responses from cassettes only. Holds no network client.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    store: CassetteStore,
}

impl ReplayBackend {
    pub fn new(store: CassetteStore) -> Self {
        Self { store }
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let key = replay_key(request);
        match self.store.load(&key)? {
            Some(entry) => Ok(entry.into_response()),
            None => Err(GatewayError::CassetteMiss(key)),
        }
    }
}

/// Serves cassette hits and forwards misses to `inner`, persisting the answer.
pub struct Recorder<B> {
    inner: B,
    store: CassetteStore,
}

impl<B: ChatBackend> Recorder<B> {
    pub fn new(inner: B, store: CassetteStore) -> Self {
        Self { inner, store }
    }

    pub fn store(&self) -> &CassetteStore {
        &self.store
    }
}

impl<B: ChatBackend> ChatBackend for Recorder<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let key = replay_key(request);
        if let Some(entry) = self.store.load(&key)? {
            return Ok(entry.into_response());
        }
        let response = self.inner.complete(request)?;
        self.store.save(&CassetteEntry {
            request_digest: key,
            response_text: response.text.clone(),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
        })?;
        Ok(response)
    }
}
