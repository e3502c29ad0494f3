//! Reproducibility stamps for written artifacts, and atomic file writes.
//!
//! Every stamp carries the tool version, the seed and a SHA-256 of the
//! canonical configuration. Nothing time- or host-dependent goes in, so
//! identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "bte";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    /// Lowercase hex SHA-256 of [`canonical_config`].
    pub config_hash: String,
}

/// `key=value` lines in key order, newline-terminated.
pub fn canonical_config(config: &BTreeMap<String, String>) -> String {
    config.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn config_hash(config: &BTreeMap<String, String>) -> String {
    hex::encode(Sha256::digest(canonical_config(config).as_bytes()))
}

impl Provenance {
    pub fn new(seed: u64, config: &BTreeMap<String, String>) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_owned(),
            seed,
            config_hash: config_hash(config),
        }
    }

    /// Comment lines (without the leading `# `) for text outputs.
    pub fn comments(&self) -> Vec<String> {
        vec![
            format!("tool {TOOL_NAME} {}", self.tool_version),
            format!("seed {}", self.seed),
            format!("config sha256:{}", self.config_hash),
        ]
    }

    /// Key/value pairs for binary metadata blocks.
    pub fn meta(&self) -> Vec<(String, String)> {
        vec![
            ("tool".into(), format!("{TOOL_NAME} {}", self.tool_version)),
            ("seed".into(), self.seed.to_string()),
            ("config_sha256".into(), self.config_hash.clone()),
        ]
    }

    /// Recovers a stamp from metadata pairs written by [`Provenance::meta`].
    pub fn from_meta(meta: &[(String, String)]) -> Option<Self> {
        let get = |k: &str| meta.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let tool_version = get("tool")?.strip_prefix(TOOL_NAME)?.trim().to_owned();
        Some(Self {
            tool_version,
            seed: get("seed")?.parse().ok()?,
            config_hash: get("config_sha256")?.to_owned(),
        })
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> std::io::Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
