//! Run manifests: the command, its full configuration, a configuration hash and artifact hashes.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Completed,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    /// Everything that influences the results.
    pub config: serde_json::Value,
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
    pub state: RunState,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form of `config`.
pub fn config_hash(config: &serde_json::Value) -> String {
    let canonical = serde_json::to_vec(config).expect("JSON values always serialize");
    hex(&Sha256::digest(canonical))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut reader = BufReader::new(File::open(path).map_err(Error::io(path))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(Error::io(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

impl RunManifest {
    /// Creates the manifest and writes it to `<dir>/manifest.json` before any work starts.
    pub fn begin<C: Serialize>(dir: &Path, command: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(Error::json(dir.join(MANIFEST_FILE)))?;
        let manifest = Self {
            command: command.into(),
            seed,
            config_hash: config_hash(&config),
            config,
            artifacts: Vec::new(),
            state: RunState::Running,
            started_unix: now(),
            finished_unix: None,
        };
        manifest.save(dir)?;
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        read_json(&file)
    }

    pub fn add_artifacts(&mut self, dir: &Path, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let rel = p.strip_prefix(dir).unwrap_or(p);
            self.artifacts.push(Artifact {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: file_sha256(p)?,
            });
        }
        Ok(())
    }

    pub fn finish(&mut self, dir: &Path, state: RunState) -> Result<()> {
        self.state = state;
        self.finished_unix = Some(now());
        self.save(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"b": 1, "a": [1.5, 2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"a": [1.5, 2], "b": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c: serde_json::Value = serde_json::from_str(r#"{"a": [1.5, 3], "b": 1}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
    }

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            file_sha256(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn begin_writes_first() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::begin(dir.path(), "gen-data", 7, &serde_json::json!({"seed": 7})).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap().state, RunState::Running);
        m.finish(dir.path(), RunState::Completed).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), m);
    }
}
