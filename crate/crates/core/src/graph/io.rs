//! Dataset directory and binary matrix formats.
//!
//! A dataset directory holds:
//!
//! ```text
//! edges.tsv      one "u<TAB>v" pair per line, 0-indexed
//! features.bin   binary matrix (see below), or features.csv (comma separated rows)
//! labels.csv     optional, one integer per line
//! meta           n_nodes=..., n_features=..., n_clusters=...
//! ```
//!
//! Binary matrices are two little-endian `u64` values `(rows, cols)` followed
//! by `rows * cols` little-endian `f32` values in row-major order.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};

const HEADER_BYTES: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixHeader {
    pub rows: u64,
    pub cols: u64,
}

impl MatrixHeader {
    /// Reads and sanity-checks the header against the file length.
    pub fn read(path: &Path) -> Result<Self> {
        let mut f = fs::File::open(path).map_err(|source| load_err(path, source))?;
        let len = f.metadata()?.len();
        let mut buf = [0u8; 16];
        f.read_exact(&mut buf)
            .map_err(|_| Error::shape(format!("{}: truncated matrix header", path.display())))?;
        let rows = u64::from_le_bytes(buf[..8].try_into().unwrap());
        let cols = u64::from_le_bytes(buf[8..].try_into().unwrap());
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_BYTES));
        if expected != Some(len) {
            return Err(Error::shape(format!(
                "{}: header says {rows}x{cols} but file holds {} payload bytes",
                path.display(),
                len.saturating_sub(HEADER_BYTES)
            )));
        }
        Ok(Self { rows, cols })
    }
}

fn load_err(path: &Path, source: std::io::Error) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_matrix_bin(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.iter() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_bin(path: &Path) -> Result<Array2<f64>> {
    let header = MatrixHeader::read(path)?;
    let bytes = fs::read(path).map_err(|source| load_err(path, source))?;
    let data: Vec<f64> = bytes[HEADER_BYTES as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Array2::from_shape_vec((header.rows as usize, header.cols as usize), data)
        .map_err(|e| Error::shape(format!("{}: {e}", path.display())))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|source| load_err(path, source))?;
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut cols: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|e| Error::Parse {
                context: format!("{}:{}", path.display(), lineno + 1),
                message: format!("{e}"),
            })?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::shape(format!(
                    "{}:{}: row has {width} values, expected {c}",
                    path.display(),
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data)
        .map_err(|e| Error::shape(format!("{}: {e}", path.display())))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|source| load_err(path, source))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|e| Error::Parse {
                context: format!("{}:{}", path.display(), i + 1),
                message: format!("{e}"),
            })
        })
        .collect()
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|source| load_err(path, source))?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next = || -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Parse {
                    context: format!("{}:{}", path.display(), i + 1),
                    message: "expected two node ids".into(),
                })?
                .parse()
                .map_err(|e| Error::Parse {
                    context: format!("{}:{}", path.display(), i + 1),
                    message: format!("{e}"),
                })
        };
        let u = next()?;
        let v = next()?;
        edges.push((u, v));
    }
    Ok(edges)
}

#[derive(Debug, Default)]
struct Meta {
    n_nodes: Option<usize>,
    n_features: Option<usize>,
    n_clusters: Option<usize>,
}

fn read_meta(path: &Path) -> Result<Meta> {
    let text = fs::read_to_string(path).map_err(|source| load_err(path, source))?;
    let mut meta = Meta::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            context: format!("{}:{}", path.display(), i + 1),
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err("expected key=value".into()))?;
        let v: usize = v.trim().parse().map_err(|e| parse_err(format!("{e}")))?;
        match k.trim() {
            "n_nodes" => meta.n_nodes = Some(v),
            "n_features" => meta.n_features = Some(v),
            "n_clusters" => meta.n_clusters = Some(v),
            other => log::warn!("{}: ignoring unknown meta key {other}", path.display()),
        }
    }
    Ok(meta)
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(load_err(
            &p,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ))
    }
}

/// Loads a dataset directory and validates it against its `meta` file.
pub fn load_dataset(dir: &Path) -> Result<Graph> {
    let meta = read_meta(&require(dir, "meta")?)?;
    let n = meta
        .n_nodes
        .ok_or_else(|| Error::shape("meta is missing n_nodes"))?;
    let d = meta
        .n_features
        .ok_or_else(|| Error::shape("meta is missing n_features"))?;

    let edges = read_edges(&require(dir, "edges.tsv")?)?;

    let bin = dir.join("features.bin");
    let features = if bin.is_file() {
        read_matrix_bin(&bin)?
    } else {
        read_matrix_csv(&require(dir, "features.csv")?)?
    };
    if features.dim() != (n, d) {
        return Err(Error::shape(format!(
            "features are {}x{} but meta says n_nodes={n}, n_features={d}",
            features.nrows(),
            features.ncols()
        )));
    }

    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.is_file() {
        Some(read_labels(&labels_path)?)
    } else {
        None
    };

    Graph::new(n, edges, features, labels, meta.n_clusters)
}

pub fn save_dataset(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut meta = format!(
        "n_nodes={}\nn_features={}\n",
        g.num_nodes(),
        g.num_features()
    );
    if let Some(c) = g.num_clusters() {
        meta.push_str(&format!("n_clusters={c}\n"));
    }
    fs::write(dir.join("meta"), meta)?;

    let mut edges = String::new();
    for (u, v) in g.edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    fs::write(dir.join("edges.tsv"), edges)?;
    write_matrix_bin(&dir.join("features.bin"), g.features())?;
    if let Some(labels) = g.labels() {
        let text: String = labels.iter().map(|y| format!("{y}\n")).collect();
        fs::write(dir.join("labels.csv"), text)?;
    }
    Ok(())
}
