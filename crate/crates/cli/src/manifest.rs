//! Run manifest: written before the heavy work starts, finalized with file
//! checksums once the outputs exist.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Parameter {
    pub key: String,
    pub value: String,
    /// `config` or `command line`.
    pub source: String,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct InventoryEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub timestamp: String,
    /// SHA-256 of the resolved configuration, overrides applied.
    pub config_sha256: String,
    pub config_path: Option<String>,
    pub status: String,
    pub parameters: Vec<Parameter>,
    pub resolved_config: String,
    pub inventory: Vec<InventoryEntry>,
    pub exit_code: Option<i32>,
    pub message: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, resolved: String, parameters: Vec<Parameter>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            config_sha256: sha256_hex(resolved.as_bytes()),
            config_path: config_path.map(|p| p.display().to_string()),
            status: "running".into(),
            parameters,
            resolved_config: resolved,
            inventory: Vec::new(),
            exit_code: None,
            message: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(FILE_NAME);
        fs::write(&path, self.to_json())?;
        Ok(path)
    }

    /// Records checksums of `files` (paths relative to `dir` where possible) and rewrites the manifest.
    pub fn finalize(&mut self, dir: &Path, files: &[PathBuf], exit_code: i32, message: Option<String>) -> std::io::Result<()> {
        self.inventory.clear();
        for f in files {
            let bytes = fs::read(f)?;
            self.inventory.push(InventoryEntry {
                path: f.strip_prefix(dir).unwrap_or(f).display().to_string(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        self.status = if exit_code == 0 { "complete" } else { "failed" }.into();
        self.exit_code = Some(exit_code);
        self.message = message;
        self.write(dir).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn finalize_lists_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        fs::write(&f, "abc").unwrap();
        let mut m = RunManifest::new("test", None, "x = 1".into(), Vec::new());
        m.write(dir.path()).unwrap();
        m.finalize(dir.path(), &[f], 0, None).unwrap();
        let text = fs::read_to_string(dir.path().join(FILE_NAME)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["status"], "complete");
        assert_eq!(v["inventory"][0]["path"], "a.txt");
        assert_eq!(
            v["inventory"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
