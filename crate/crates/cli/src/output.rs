//! CSV/JSON emission and the run manifest.
//!
//! CSV files are UTF-8 with LF line endings, a fixed header row, and every
//! number written with 17 significant digits. Missing values are empty
//! fields.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Csv {
    buf: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Csv { buf, width: header.len() }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        assert_eq!(fields.len(), self.width, "CSV row width mismatch");
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

/// Record of one invocation, written as `manifest.json` next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub seed_rule: String,
    pub timings: Vec<Timing>,
    pub files: Vec<FileEntry>,
    pub notes: Vec<String>,
}

/// Tracks files written into the output directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, contents)?;
        self.register(name)?;
        Ok(path)
    }

    /// Adds a file written by other code to the inventory.
    pub fn register(&mut self, name: &str) -> Result<(), CliError> {
        let bytes = fs::read(self.path(name))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(
        self,
        command: &str,
        config: &RunConfig,
        timings: Vec<(&str, Duration)>,
        notes: Vec<String>,
    ) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            seed: config.experiment.seed,
            seed_rule: "trial m: hyperparameters seed splitmix64(seed ^ splitmix64(2m)), \
                        noise seed splitmix64(seed ^ splitmix64(2m + 1)); ChaCha8 streams"
                .to_string(),
            timings: timings
                .into_iter()
                .map(|(phase, d)| Timing { phase: phase.to_string(), seconds: d.as_secs_f64() })
                .collect(),
            files: self.files.clone(),
            notes,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Numerical(format!("serializing manifest: {e}")))?;
        text.push('\n');
        let path = self.path("manifest.json");
        fs::write(&path, text)?;
        Ok(path)
    }
}
