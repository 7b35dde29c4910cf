//! On-disk caches for filtered and cross features.
//!
//! Each cache matrix `name.bin` has a sidecar `name.bin.key` recording the
//! content key it was built from and the SHA-256 of the payload. A cache is
//! reused only when both match; anything else triggers a rebuild.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::graph::{read_matrix_bin, write_matrix_bin, MatrixHeader};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
    /// Existing file was unreadable or did not match its sidecar.
    Rebuilt,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".key");
    PathBuf::from(s)
}

fn read_sidecar(path: &Path) -> Option<(String, String)> {
    let text = fs::read_to_string(sidecar(path)).ok()?;
    let mut key = None;
    let mut hash = None;
    for line in text.lines() {
        match line.split_once(" = ") {
            Some(("key", v)) => key = Some(v.to_string()),
            Some(("sha256", v)) => hash = Some(v.to_string()),
            _ => {}
        }
    }
    Some((key?, hash?))
}

/// Why an existing cache cannot be reused, or `None` if it can.
fn stale_reason(path: &Path, key: &str) -> Option<String> {
    if let Err(e) = MatrixHeader::read(path) {
        return Some(format!("corrupted header ({e})"));
    }
    let Some((stored_key, stored_hash)) = read_sidecar(path) else {
        return Some("missing or unreadable key file".into());
    };
    if stored_key != key {
        return Some("built from different inputs".into());
    }
    match sha256_file(path) {
        Ok(h) if h == stored_hash => None,
        _ => Some("payload checksum mismatch".into()),
    }
}

/// Returns the cached matrix at `path`, building and storing it first when
/// no valid cache exists. The matrix is always read back from disk so hits
/// and fresh builds yield identical values.
pub fn cached_matrix(
    path: &Path,
    key: &str,
    build: impl FnOnce() -> Result<Array2<f64>>,
) -> Result<(Array2<f64>, CacheStatus)> {
    let status = if path.exists() {
        match stale_reason(path, key) {
            None => {
                log::info!("cache hit: {}", path.display());
                return Ok((read_matrix_bin(path)?, CacheStatus::Hit));
            }
            Some(reason) => {
                log::warn!("cache {} is stale: {reason}; regenerating", path.display());
                CacheStatus::Rebuilt
            }
        }
    } else {
        CacheStatus::Built
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let m = build()?;
    write_matrix_bin(path, &m)?;
    let hash = sha256_file(path)?;
    fs::write(sidecar(path), format!("key = {key}\nsha256 = {hash}\n"))?;
    log::info!("cache written: {}", path.display());
    Ok((read_matrix_bin(path)?, status))
}
