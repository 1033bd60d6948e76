//! Report envelope and input bookkeeping shared by all subcommands.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub results: Value,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

/// Collects input files (for the digest) and warnings while a command runs.
#[derive(Default)]
pub struct Session {
    hasher: Sha256,
    pub warnings: Vec<String>,
}

impl Session {
    /// Reads `path` and mixes its name tag and contents into the digest.
    pub fn read(&mut self, tag: &str, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("--{tag}: cannot read {}", path.display()))?;
        self.hasher.update(tag.as_bytes());
        self.hasher.update([0]);
        self.hasher.update(text.as_bytes());
        self.hasher.update([0]);
        Ok(text)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn finish(self, command: &str, results: Value, error: Option<Value>) -> Report {
        Report {
            command: command.to_string(),
            inputs_digest: hex::encode(self.hasher.finalize()),
            results,
            warnings: self.warnings,
            error,
        }
    }
}
