//! Run manifests: what ran, with which resolved settings, over which bytes.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fsio::write_json;

/// Manifest name for subcommands that write a directory of files.
pub const DIR_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    /// SHA-256 over `blob <len>\0<content>`, the same framing git uses.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Manifests of upstream runs whose outputs this run consumed.
    #[serde(default)]
    pub parents: Vec<FileDigest>,
}

pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let content = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        bytes: content.len() as u64,
        sha256: blob_hash(&content),
    })
}

/// `out.ckpt` → `out.ckpt.manifest.json`
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

impl RunManifest {
    pub fn new<C: Serialize>(subcommand: &str, config: &C, seed: Option<u64>) -> Result<Self> {
        Ok(RunManifest {
            tool: "acrank".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            parents: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path)?);
        // chain to the producer's manifest when one sits next to the input
        // (a sibling `x.manifest.json`, or the directory's `manifest.json`
        // for subcommands that write several files)
        let own = manifest_path_for(path);
        let upstream = if own.exists() {
            Some(own)
        } else {
            path.parent()
                .map(|d| d.join(DIR_MANIFEST))
                .filter(|m| m.exists() && m.as_path() != path)
        };
        if let Some(up) = upstream {
            let d = digest(&up)?;
            if !self.parents.contains(&d) {
                self.parents.push(d);
            }
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(digest(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_framing() {
        // printf 'hello\n' | git hash-object --stdin uses SHA-1; the framing
        // is the same, checked here against a SHA-256 of the framed bytes
        let framed = b"blob 6\0hello\n";
        let direct: String = Sha256::digest(framed).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(blob_hash(b"hello\n"), direct);
        assert_eq!(
            blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn manifest_path() {
        assert_eq!(manifest_path_for(Path::new("a/m.ckpt")), Path::new("a/m.ckpt.manifest.json"));
    }
}
