//! Run records stamped into every artifact.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    pub config: Value,
    /// SHA-256 of the canonical (key-sorted, compact) JSON of `config`.
    pub config_hash: String,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn provenance(command: &str, config: &impl Serialize) -> Result<Provenance> {
    let config = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&config)?;
    Ok(Provenance {
        tool: format!("coherent {}", env!("CARGO_PKG_VERSION")),
        command: command.to_string(),
        config_hash: hex(&Sha256::digest(canonical.as_bytes())),
        config,
    })
}

/// Hash over relative paths and contents of every file under `root`, in
/// sorted path order.
pub fn dir_hash(root: &Path) -> Result<String> {
    fn walk(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(root)?.to_string_lossy().replace('\\', "/");
        h.update(rel.as_bytes());
        h.update([0]);
        let data = fs::read(&f)?;
        h.update((data.len() as u64).to_le_bytes());
        h.update(&data);
    }
    Ok(hex(&h.finalize()))
}
