//! Per-verb manifests: config hash, input hashes, output hashes.
//!
//! Manifests contain no timestamps or absolute paths, so a rerun with the
//! same inputs is byte-identical, and each verb hashing its actual inputs
//! chains the whole pipeline: any upstream change shows up downstream.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub verb: String,
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    /// Path (relative to the run dir or data dir) -> sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot hash {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

pub struct ManifestBuilder {
    verb: String,
    config_hash: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    verb_dir: PathBuf,
}

impl ManifestBuilder {
    /// `config_bytes` is the canonical serialization of the run config; the
    /// manifest stores its hash so config drift invalidates the chain.
    pub fn new(verb: &str, out_dir: &Path, config_bytes: &[u8]) -> Self {
        ManifestBuilder {
            verb: verb.to_string(),
            config_hash: sha256_hex(config_bytes),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            verb_dir: out_dir.join(verb),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.verb_dir
    }

    pub fn record_input(&mut self, label: &str, path: &Path) -> Result<()> {
        self.inputs.insert(label.to_string(), hash_file(path)?);
        Ok(())
    }

    /// Writes bytes atomically into the verb dir and records the hash.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.verb_dir.join(name);
        herbgraph_core::io::write_atomic(&path, bytes)
            .with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Records an output some other writer produced inside the verb dir.
    pub fn record_output(&mut self, name: &str) -> Result<()> {
        let path = self.verb_dir.join(name);
        self.outputs.insert(name.to_string(), hash_file(&path)?);
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            verb: self.verb,
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let bytes = serde_json::to_vec_pretty(&manifest)?;
        herbgraph_core::io::write_atomic(&self.verb_dir.join("manifest.json"), &bytes)?;
        Ok(())
    }
}

/// The error surface for "verb run before its prerequisite".
pub fn require_artifact(path: &Path) -> Result<()> {
    if !path.exists() {
        anyhow::bail!(
            "missing artifact: {}",
            path.file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string())
        );
    }
    Ok(())
}
