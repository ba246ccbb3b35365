//! Run manifests and hashed artifact output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::Result;
use crate::geometry::GridDomain;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// path relative to the output directory
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// no admissible samples at this resolution; does not count as a failure
    #[serde(default)]
    pub skipped: bool,
    #[serde(default)]
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub domain_sha256: Option<String>,
    /// seconds per operation, in execution order
    pub wall_times: Vec<(String, f64)>,
    pub reports: serde_json::Map<String, serde_json::Value>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, config: RunConfig) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            domain_sha256: None,
            wall_times: Vec::new(),
            reports: serde_json::Map::new(),
            checks: Vec::new(),
            passed: true,
            artifacts: Vec::new(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest-{command}.json")
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.checks.push(CheckOutcome { name: name.into(), passed, skipped: false, detail: detail.into() });
    }

    pub fn skip(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(CheckOutcome { name: name.into(), passed: false, skipped: true, detail: detail.into() });
    }

    pub fn report<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.reports.insert(name.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        self.wall_times.push((name.into(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a domain: its header and packed cell mask.
pub fn domain_hash(domain: &GridDomain) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&domain.header(""))?);
    hasher.update(domain.packed_mask());
    Ok(hex::encode(hasher.finalize()))
}

/// Writes files under one output directory and records their hashes.
pub struct ArtifactWriter {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ArtifactWriter { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        self.record(name, bytes);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Records a file already written under the root.
    pub fn adopt(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let name = path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().into_owned();
        self.record(&name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(Artifact { path: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }

    /// Attaches the artifact list and writes the manifest itself.
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf> {
        manifest.artifacts = self.artifacts;
        let path = self.root.join(RunManifest::file_name(&manifest.command));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}
