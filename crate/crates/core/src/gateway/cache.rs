use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{cache_key, ChatRequest, ChatResponse, GatewayError};

/// One stored exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_echo: ChatRequest,
    pub response: ChatResponse,
    pub created_at: String,
    pub response_digest: String,
}

/// Content-addressed store: `<dir>/<first two hex chars>/<key>.json`.
#[derive(Debug, Clone)]
pub struct CacheStore {
    dir: PathBuf,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn response_digest(response: &ChatResponse) -> String {
    let json = serde_json::to_vec(response).expect("response serializes");
    hex::encode(Sha256::digest(json))
}

impl CacheStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CacheStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2.min(key.len())]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<ChatResponse>, GatewayError> {
        let path = self.path_for(key);
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(GatewayError::CacheIo { path, source }),
        };
        let corrupt = |reason: String| GatewayError::CacheCorrupt {
            path: path.clone(),
            reason,
        };
        let entry: CacheEntry = serde_json::from_slice(&raw).map_err(|e| corrupt(e.to_string()))?;
        if cache_key(&entry.request_echo) != key {
            return Err(corrupt("request echo does not match its key".into()));
        }
        if response_digest(&entry.response) != entry.response_digest {
            return Err(corrupt("response digest mismatch".into()));
        }
        Ok(Some(entry.response))
    }

    /// Publishes an entry atomically (write to a temp file, then rename).
    pub fn put(&self, key: &str, request: &ChatRequest, response: &ChatResponse) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        let parent = path.parent().expect("entry path has a parent");
        let io = |source| GatewayError::CacheIo {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(parent).map_err(io)?;
        let mut stored = response.clone();
        stored.cached = false;
        let entry = CacheEntry {
            request_echo: request.clone(),
            response_digest: response_digest(&stored),
            response: stored,
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let tmp = parent.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut file = fs::File::create(&tmp).map_err(io)?;
        file.write_all(&serde_json::to_vec_pretty(&entry).expect("entry serializes"))
            .and_then(|_| file.sync_all())
            .map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)
    }

    /// Number of published entries.
    pub fn len(&self) -> usize {
        let Ok(shards) = fs::read_dir(&self.dir) else { return 0 };
        shards
            .flatten()
            .filter_map(|s| fs::read_dir(s.path()).ok())
            .flat_map(|d| d.flatten())
            .filter(|f| f.path().extension().is_some_and(|x| x == "json"))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FinishReason, TokenUsage};

    fn response(text: &str) -> ChatResponse {
        ChatResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            token_usage: TokenUsage { prompt: 3, completion: 1 },
            provider: "test".into(),
            cached: false,
        }
    }

    #[test]
    fn round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let store = CacheStore::new(dir.path());
        let req = ChatRequest::user("m", "Q1");
        let key = cache_key(&req);
        assert_eq!(store.get(&key).unwrap(), None);
        store.put(&key, &req, &response("client")).unwrap();
        assert_eq!(store.get(&key).unwrap().unwrap().text, "client");
        assert_eq!(store.len(), 1);

        let path = store.path_for(&key);
        let tampered = fs::read_to_string(&path).unwrap().replace("\"client\"", "\"engineer\"");
        fs::write(&path, tampered).unwrap();
        assert!(matches!(store.get(&key), Err(GatewayError::CacheCorrupt { .. })));

        fs::write(&path, "{not json").unwrap();
        assert!(matches!(store.get(&key), Err(GatewayError::CacheCorrupt { .. })));
    }
}
