//! One module per pipeline verb. Every verb reads its prerequisites from the
//! run directory (or the data directory for `ingest`), writes artifacts
//! atomically, and finishes with a manifest.

pub mod analyze;
pub mod diffuse;
pub mod embed;
pub mod encode;
pub mod eval;
pub mod explain;
pub mod ingest;
pub mod project2d;
pub mod report;
pub mod train;
pub mod tune;

use std::path::PathBuf;

use anyhow::Result;

use crate::config::RunConfig;

/// Everything a verb needs: the parsed config plus its canonical bytes for
/// hashing.
pub struct Ctx {
    pub config: RunConfig,
    pub config_bytes: Vec<u8>,
}

impl Ctx {
    pub fn new(config: RunConfig) -> Result<Self> {
        // Canonical JSON (sorted keys via struct order) for the config hash.
        let config_bytes = serde_json::to_vec(&config)?;
        Ok(Ctx {
            config,
            config_bytes,
        })
    }

    pub fn ingest_tables_dir(&self) -> PathBuf {
        self.config.out_dir.join("ingest").join("tables")
    }
}
