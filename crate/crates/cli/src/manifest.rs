use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "runs.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// One line of `runs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_digest: Option<String>,
    pub inputs: Vec<FileDigest>,
    pub seed: Option<u64>,
    pub params: serde_json::Value,
    pub outputs: Vec<FileDigest>,
    pub started_at: DateTime<Utc>,
    pub elapsed_ms: u64,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects what a command read and wrote while it runs.
pub struct RunRecorder {
    manifest: RunManifest,
    clock: Instant,
}

impl RunRecorder {
    pub fn new(command: &str, seed: Option<u64>, config: Option<&Path>) -> Result<Self, CliError> {
        Ok(Self {
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config_digest: config.map(sha256_file).transpose()?,
                inputs: Vec::new(),
                seed,
                params: serde_json::Value::Null,
                outputs: Vec::new(),
                started_at: Utc::now(),
                elapsed_ms: 0,
            },
            clock: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_file(path)?;
        self.manifest.outputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn params(&mut self, params: serde_json::Value) {
        self.manifest.params = params;
    }

    /// Appends the manifest to `dir/runs.jsonl`.
    pub fn finish(mut self, dir: &Path) -> Result<RunManifest, CliError> {
        self.manifest.elapsed_ms = self.clock.elapsed().as_millis() as u64;
        let path = dir.join(MANIFEST_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        let mut line = serde_json::to_string(&self.manifest).expect("manifest serializes");
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(|e| CliError::io(&path, e))?;
        Ok(self.manifest)
    }
}
