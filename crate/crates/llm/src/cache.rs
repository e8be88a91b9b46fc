//! Content-addressed completion cache: one JSON file per key.
//!
//! Writes go to a temporary file in the same directory and are renamed into
//! place, so concurrent readers see either nothing or a complete entry.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LlmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub model: String,
    pub temperature: f64,
    pub prompt_sha256: String,
    pub completion: String,
    /// Latency of the request that filled the entry.
    pub latency: f64,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

impl Cache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Cache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Key over (model, prompt hash, temperature). Temperature uses its bit
    /// pattern so `0.0` and `0.00` agree but `-0.0` does not sneak in.
    pub fn key(model: &str, prompt: &str, temperature: f64) -> String {
        let t = if temperature == 0.0 { 0.0f64 } else { temperature };
        let material = format!("{model}\0{}\0{:016x}", sha256_hex(prompt.as_bytes()), t.to_bits());
        sha256_hex(material.as_bytes())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, model: &str, prompt: &str, temperature: f64) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.path(&Self::key(model, prompt, temperature));
        match std::fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes).map_err(|e| LlmError::CacheCorrupt {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, prompt: &str, entry: &CacheEntry) -> Result<(), LlmError> {
        let path = self.path(&Self::key(&entry.model, prompt, entry.temperature));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&serde_json::to_vec_pretty(entry).expect("entry serializes"))?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| LlmError::Io(e.error))?;
        Ok(())
    }

    pub fn len(&self) -> Result<usize, LlmError> {
        let mut n = 0;
        for entry in std::fs::read_dir(&self.dir)? {
            if entry?.path().extension().is_some_and(|e| e == "json") {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn is_empty(&self) -> Result<bool, LlmError> {
        Ok(self.len()? == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(model: &str, completion: &str) -> CacheEntry {
        CacheEntry {
            model: model.into(),
            temperature: 0.0,
            prompt_sha256: sha256_hex(b"p"),
            completion: completion.into(),
            latency: 0.25,
        }
    }

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        assert_eq!(cache.get("m", "p", 0.0).unwrap(), None);
        cache.put("p", &entry("m", "hello")).unwrap();
        assert_eq!(cache.get("m", "p", 0.0).unwrap().unwrap().completion, "hello");
        assert_eq!(cache.len().unwrap(), 1);
    }

    #[test]
    fn key_separates_model_prompt_and_temperature() {
        let k = Cache::key("m", "p", 0.0);
        assert_eq!(k, Cache::key("m", "p", -0.0));
        assert_ne!(k, Cache::key("n", "p", 0.0));
        assert_ne!(k, Cache::key("m", "q", 0.0));
        assert_ne!(k, Cache::key("m", "p", 0.7));
    }

    #[test]
    fn overwrite_is_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        cache.put("p", &entry("m", &"x".repeat(10_000))).unwrap();
        cache.put("p", &entry("m", "short")).unwrap();
        assert_eq!(cache.get("m", "p", 0.0).unwrap().unwrap().completion, "short");
        assert_eq!(cache.len().unwrap(), 1);
    }

    #[test]
    fn corrupt_entry_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        std::fs::write(dir.path().join(format!("{}.json", Cache::key("m", "p", 0.0))), "{").unwrap();
        assert!(matches!(cache.get("m", "p", 0.0), Err(LlmError::CacheCorrupt { .. })));
    }
}
