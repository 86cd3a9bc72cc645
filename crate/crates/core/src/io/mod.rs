//! File formats and configuration.

use std::path::Path;

use crate::error::{Error, Result};

pub mod config;
pub mod manifest;
pub mod sweep_csv;
pub mod touchstone;

pub use config::{load_config, RunConfig};
pub use manifest::Manifest;
pub use sweep_csv::{read_sweep_csv, sweep_csv_string, write_sweep_csv};
pub use touchstone::{parse_touchstone, write_touchstone, Touchstone, TwoPortPoint};

/// Writes `bytes` to a sibling temporary file and renames it into place, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
