//! Output directory bookkeeping, CSV writing and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Formats a float so that it round-trips; `None` becomes an empty cell.
pub fn cell(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Shortest round-trip form, in scientific notation for very small or large
/// magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Collects the files written by one command.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().context("flushing CSV buffer")?;
        self.write(name, &bytes)
    }
}

/// `manifest.json`: enough to tell which inputs and builds produced a run.
/// Nothing in it depends on the wall clock.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub otoc_core_version: &'static str,
    pub command: &'a str,
    pub config_source: &'a str,
    /// SHA-256 of the config file exactly as read.
    pub config_sha256: String,
    /// The config after defaults and command-line overrides; absent when
    /// `check-symmetry` reads a bare Hamiltonian.
    pub effective_config: Option<&'a crate::config::ExperimentConfig>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub threads: usize,
    pub warnings: &'a [String],
    pub files: Vec<FileEntry>,
}

impl Manifest<'_> {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        let path = dir.join("manifest.json");
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn floats_round_trip_and_none_is_empty() {
        let x = 0.1 + 0.2;
        assert_eq!(cell(Some(x)).parse::<f64>().unwrap(), x);
        assert_eq!(cell(None), "");
        assert_eq!(num(2.5e-16), "2.5e-16");
        assert_eq!(num(-0.25), "-0.25");
        for x in [1e-300, -3.3e-5, 1e20, 123.456] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
