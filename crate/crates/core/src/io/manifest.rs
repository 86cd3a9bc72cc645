//! Run manifest: what was run, with which configuration, and what it wrote.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub solver: String,
    /// Wall-clock seconds per phase.
    pub timings_s: BTreeMap<String, f64>,
    /// Output files, relative to the output directory.
    pub files: Vec<String>,
    /// Command-specific summary figures.
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, config_hash: impl Into<String>, solver: impl Into<String>) -> Self {
        Manifest {
            command: command.into(),
            config_hash: config_hash.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            solver: solver.into(),
            timings_s: BTreeMap::new(),
            files: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        write_atomic(path, s.as_bytes())
    }
}
