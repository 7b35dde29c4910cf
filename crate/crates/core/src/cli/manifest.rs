use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::cache::sha256_file;
use crate::error::{Error, Result};

/// Record of one command invocation: configuration, inputs and the
/// artifacts it wrote, each with a content hash.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    pub dataset: Option<PathBuf>,
    pub input_hashes: Vec<(String, String)>,
    pub config: String,
    pub artifacts: Vec<PathBuf>,
    pub started_unix: u64,
    pub wall_secs: f64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: String) -> Self {
        Self {
            command: command.to_string(),
            status: "complete".into(),
            config,
            started_unix: unix_now(),
            ..Self::default()
        }
    }

    /// Hashes the dataset files that exist in `dir`.
    pub fn hash_dataset(&mut self, dir: &Path) -> Result<()> {
        self.dataset = Some(dir.to_path_buf());
        for name in ["meta", "edges.tsv", "features.bin", "features.csv", "labels.csv"] {
            let p = dir.join(name);
            if p.is_file() {
                self.input_hashes.push((name.to_string(), sha256_file(&p)?));
            }
        }
        Ok(())
    }

    /// Writes the manifest after checking every artifact exists.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "status = {}", self.status);
        if let Some(d) = &self.dataset {
            let _ = writeln!(s, "dataset = {}", d.display());
        }
        let _ = writeln!(s, "started_unix = {}", self.started_unix);
        let _ = writeln!(s, "wall_secs = {:.3}", self.wall_secs);
        s.push_str("\n[inputs]\n");
        for (name, h) in &self.input_hashes {
            let _ = writeln!(s, "{name} {h}");
        }
        s.push_str("\n[config]\n");
        s.push_str(&self.config);
        s.push_str("\n[artifacts]\n");
        for a in &self.artifacts {
            if !a.is_file() {
                return Err(Error::Precondition(format!(
                    "manifest references missing artifact {}",
                    a.display()
                )));
            }
            let _ = writeln!(s, "{} {}", a.display(), sha256_file(a)?);
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}
