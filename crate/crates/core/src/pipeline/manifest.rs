//! Reproducibility record for a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Config snapshot, produced files with SHA-256 hashes, tool version,
/// per-stage wall times and free-form notes. Paths are relative to the run
/// directory. Wall times make the manifest itself run-dependent.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub files: BTreeMap<String, String>,
    pub wall_times: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            files: BTreeMap::new(),
            wall_times: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Writes `bytes` to `dir/rel` and records its hash.
    pub fn write_file(&mut self, dir: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Records an existing file.
    pub fn record_file(&mut self, dir: &Path, rel: &str) -> Result<()> {
        let path = dir.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn note(&mut self, text: impl Into<String>) {
        let text = text.into();
        if !self.notes.contains(&text) {
            self.notes.push(text);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tool_version = {}", self.tool_version);
        for line in self.config.emit().lines() {
            let _ = writeln!(out, "config.{line}");
        }
        for (path, hash) in &self.files {
            let _ = writeln!(out, "file.{path} = {hash}");
        }
        for (stage, secs) in &self.wall_times {
            let _ = writeln!(out, "wall_secs.{stage} = {secs}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "note = {note}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tool_version = None;
        let mut config = String::new();
        let mut files = BTreeMap::new();
        let mut wall_times = BTreeMap::new();
        let mut notes = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let err = |reason: String| Error::Config { line: k + 1, reason };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("config.") {
                config.push_str(rest);
                config.push('\n');
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .or_else(|| line.strip_suffix(" =").map(|k| (k, "")))
                .ok_or_else(|| err(format!("malformed manifest line {line:?}")))?;
            if key == "tool_version" {
                tool_version = Some(value.to_string());
            } else if key == "note" {
                notes.push(value.to_string());
            } else if let Some(path) = key.strip_prefix("file.") {
                files.insert(path.to_string(), value.to_string());
            } else if let Some(stage) = key.strip_prefix("wall_secs.") {
                let secs = value.parse::<f64>().map_err(|e| err(format!("{value:?}: {e}")))?;
                wall_times.insert(stage.to_string(), secs);
            } else {
                return Err(err(format!("unknown manifest key {key:?}")));
            }
        }
        Ok(Self {
            tool_version: tool_version.ok_or_else(|| Error::Pipeline("manifest lacks tool_version".into()))?,
            config: RunConfig::parse(&config)?,
            files,
            wall_times,
            notes,
        })
    }

    /// Reads `dir/manifest.txt`; a missing file is a pipeline error.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(Error::Pipeline(format!("no manifest in {}", dir.display())));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    pub fn load_or_new(dir: &Path, config: &RunConfig) -> Result<Self> {
        if dir.join(MANIFEST_FILE).is_file() {
            let mut m = Self::load(dir)?;
            m.config = config.clone();
            m.tool_version = env!("CARGO_PKG_VERSION").to_string();
            Ok(m)
        } else {
            Ok(Self::new(config))
        }
    }

    /// Drops entries whose file has disappeared, then writes the manifest.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.files.retain(|rel, _| dir.join(rel).is_file());
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))
    }

    /// Paths whose current content does not match the recorded hash.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(rel, hash)| {
                fs::read(dir.join(rel))
                    .map(|b| sha256_hex(&b) != **hash)
                    .unwrap_or(true)
            })
            .map(|(rel, _)| rel.clone())
            .collect()
    }
}
