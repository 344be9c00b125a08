use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use panos_core::{sha256_hex, Result};
use serde::Serialize;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the resolved settings as JSON.
    pub config_hash: String,
    pub settings: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    /// Unix seconds; taken from `SOURCE_DATE_EPOCH` when set.
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn now_unix() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    out_dir: PathBuf,
}

impl ManifestBuilder {
    pub fn new<S: Serialize>(
        command: &str,
        settings: &S,
        seeds: Vec<u64>,
        out_dir: &Path,
    ) -> Result<Self> {
        let value = serde_json::to_value(settings)?;
        let config_hash = sha256_hex(serde_json::to_string(&value)?.as_bytes());
        Ok(ManifestBuilder {
            manifest: RunManifest {
                tool: "panos".into(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config_hash,
                settings: value,
                seeds,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix: now_unix(),
                finished_unix: 0,
            },
            out_dir: out_dir.to_path_buf(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.display().to_string());
    }

    /// Records a file already written under the output directory.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let rel = path.strip_prefix(&self.out_dir).unwrap_or(path);
        self.manifest.outputs.push(OutputEntry {
            path: rel.display().to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.finished_unix = now_unix();
        let path = self.out_dir.join(MANIFEST_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        Ok(self.manifest)
    }
}
