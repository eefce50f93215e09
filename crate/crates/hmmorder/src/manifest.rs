//! Run manifests: what produced an output directory, without timestamps so
//! that identical runs write identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::files::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub subcommand: String,
    pub seed: u64,
    /// Hash of the configuration file as read from disk.
    pub config_sha256: String,
    /// The configuration after flag overrides.
    pub effective_config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(subcommand: &str, seed: u64, config_bytes: &[u8], effective: &impl Serialize) -> Self {
        Manifest {
            schema: "hmmorder.manifest/1".into(),
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: hmmorder_core::VERSION.into(),
            subcommand: subcommand.into(),
            seed,
            config_sha256: sha256_hex(config_bytes),
            effective_config: serde_json::to_value(effective).expect("serializable config"),
            files: Vec::new(),
        }
    }

    /// Hashes each named file under `dir` and writes the manifest there.
    pub fn write(mut self, dir: &Path, names: &[String]) -> Result<Self> {
        self.files = names
            .iter()
            .map(|name| {
                let path = dir.join(name);
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                Ok(FileEntry { name: name.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) })
            })
            .collect::<Result<_>>()?;
        write_json(&dir.join(MANIFEST_FILE), &self)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
