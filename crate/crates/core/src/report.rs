//! Report envelopes and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ConfigDocument, ResolvedConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of `resolved_config`.
    pub config_sha256: String,
    pub seed: u64,
    /// Every input section after defaults were applied, as YAML.
    pub resolved_config: String,
}

impl ReportHeader {
    pub fn new(command: &str, cfg: &ResolvedConfig, seed: u64) -> Self {
        let yaml = ConfigDocument::from(cfg.clone()).to_yaml();
        ReportHeader {
            tool: "crossflow",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_hex(yaml.as_bytes()),
            seed,
            resolved_config: yaml,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    header: &'a ReportHeader,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the header first.
pub fn to_json<T: Serialize>(header: &ReportHeader, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { header, body }).expect("report serializes");
    s.push('\n');
    s
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
