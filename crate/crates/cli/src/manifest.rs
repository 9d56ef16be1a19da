use std::path::{Path, PathBuf};

use cantilever_core::io::{sha256_hex, to_json, write_text};
use cantilever_core::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_utc: String,
    pub finished_utc: String,
}

/// Output files of one command, held in memory until the command succeeds
/// so that a failure leaves no partial artifact set behind.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, rel_path: impl Into<String>, content: String) {
        self.files.push((rel_path.into(), content));
    }

    pub fn extend(&mut self, other: Artifacts) {
        self.files.extend(other.files);
    }
}

pub struct RunContext {
    pub command: &'static str,
    pub started: String,
    pub config: Option<(PathBuf, String)>,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
}

pub fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunContext {
    pub fn new(command: &'static str) -> Self {
        Self { command, started: now_utc(), config: None, seed: None, inputs: Vec::new() }
    }

    pub fn input(&mut self, path: &Path, text: &str) {
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(text.as_bytes()), bytes: text.len() });
    }

    /// Writes every artifact under `out` and then `manifest.json`.
    pub fn finish(self, out: &Path, artifacts: Artifacts) -> Result<RunManifest> {
        let mut outputs = Vec::with_capacity(artifacts.files.len());
        for (rel, content) in &artifacts.files {
            write_text(&out.join(rel), content)?;
            outputs.push(FileDigest { path: rel.clone(), sha256: sha256_hex(content.as_bytes()), bytes: content.len() });
        }
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            config_path: self.config.as_ref().map(|(p, _)| p.display().to_string()),
            config_sha256: self.config.as_ref().map(|(_, t)| sha256_hex(t.as_bytes())),
            seed: self.seed,
            inputs: self.inputs,
            outputs,
            started_utc: self.started,
            finished_utc: now_utc(),
        };
        write_text(&out.join("manifest.json"), &to_json(&manifest)?)?;
        Ok(manifest)
    }
}
