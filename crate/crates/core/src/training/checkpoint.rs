//! Binary checkpoints: a magic tag, the configuration echo, then named
//! tensors with their shapes and little-endian `f32` payloads.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::ModelParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FPGCCKP1";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// `key = value` lines of the training configuration.
    pub config: String,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams, config: String) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .map(|(name, shape, data)| NamedTensor {
                name: name.to_string(),
                shape,
                data: data.iter().map(|&v| v as f32).collect(),
            })
            .collect();
        Self { config, tensors }
    }

    /// Copies stored tensors into a structurally matching `template`.
    pub fn restore_into(&self, template: &mut ModelParams) -> Result<()> {
        let shapes: Vec<Vec<usize>> = template.tensors().into_iter().map(|t| t.1).collect();
        let slots = template.tensors_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::shape(format!(
                "checkpoint holds {} tensors, model has {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for ((name, dst), (stored, shape)) in slots.into_iter().zip(self.tensors.iter().zip(shapes)) {
            if stored.name != name || stored.shape != shape {
                return Err(Error::shape(format!(
                    "checkpoint tensor {} {:?} does not match {name} {:?}",
                    stored.name, stored.shape, shape
                )));
            }
            for (d, &s) in dst.iter_mut().zip(&stored.data) {
                *d = s as f64;
            }
        }
        Ok(())
    }
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    put_str(&mut w, &ckpt.config)?;
    put_u64(&mut w, ckpt.tensors.len() as u64)?;
    for t in &ckpt.tensors {
        put_str(&mut w, &t.name)?;
        put_u64(&mut w, t.shape.len() as u64)?;
        for &s in &t.shape {
            put_u64(&mut w, s as u64)?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
    path: String,
}

impl<R: Read> Reader<R> {
    fn bad(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            context: self.path.clone(),
            message: msg.into(),
        }
    }

    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| self.bad("truncated checkpoint"))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn len(&mut self, limit: u64) -> Result<usize> {
        let v = self.u64()?;
        if v > limit {
            return Err(self.bad(format!("implausible length {v}")));
        }
        Ok(v as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len(1 << 20)?;
        String::from_utf8(self.bytes(n)?).map_err(|_| self.bad("invalid UTF-8"))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path: path.display().to_string(),
    };
    if r.bytes(MAGIC.len())? != MAGIC {
        return Err(r.bad("not a checkpoint file"));
    }
    let config = r.string()?;
    let count = r.len(1 << 16)?;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let ndim = r.len(8)?;
        let shape = (0..ndim).map(|_| r.len(1 << 32)).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let raw = r.bytes(numel * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push(NamedTensor { name, shape, data });
    }
    Ok(Checkpoint { config, tensors })
}
