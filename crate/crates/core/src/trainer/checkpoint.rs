//! Checkpoint container: `FGV1` magic, little-endian u32 tensor count,
//! then per tensor a u16 name length, the UTF-8 name, a u8 rank, rank u32
//! dims and the f32 values; a CRC32 of everything before it closes the
//! file.
//!
//! Step counters and the configuration text travel as tensors too:
//! `meta.step` and `adam.t` hold a u64 as four 16-bit limbs (exact in
//! f32), `meta.config` holds one UTF-8 byte per value.

use std::path::Path;

use super::config::TrainConfig;
use crate::autodiff::{OptimState, Tensor};
use crate::error::{bail, Result};
use crate::model::ModelParams;

const MAGIC: &[u8; 4] = b"FGV1";
const FORMAT_VERSION: f32 = 1.0;

/// Serializes named tensors.
pub fn encode_tensors(tensors: &[(String, Tensor<f32>)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        let Ok(len) = u16::try_from(name.len()) else {
            bail!(Format, "tensor name '{name}' is too long");
        };
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let Ok(rank) = u8::try_from(t.shape().len()) else {
            bail!(Format, "tensor '{name}' has too many dimensions");
        };
        out.push(rank);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            bail!(Format, "file truncated while reading {what}");
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses and integrity-checks a tensor container.
pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    if bytes.len() < 12 {
        bail!(Format, "file is too short to be a checkpoint ({} bytes)", bytes.len());
    }
    if &bytes[..4] != MAGIC {
        bail!(Format, "bad magic {:?}, expected \"FGV1\"", String::from_utf8_lossy(&bytes[..4]));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        bail!(Format, "checksum mismatch (file truncated or corrupt)");
    }
    let mut r = Reader { buf: body, pos: 4 };
    let count = r.u32("tensor count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().unwrap()) as usize;
        let Ok(name) = std::str::from_utf8(r.take(len, "tensor name")?) else {
            bail!(Format, "tensor {i} has a name that is not UTF-8");
        };
        let rank = r.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimensions")? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let Some(n) = n.filter(|&n| n <= (body.len() - r.pos) / 4) else {
            bail!(Format, "tensor '{name}' claims shape {shape:?}, more data than the file holds");
        };
        let raw = r.take(4 * n, "tensor values")?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name.to_string(), Tensor::new(&shape, data)?));
    }
    if r.pos != body.len() {
        bail!(Format, "{} trailing bytes after the last tensor", body.len() - r.pos);
    }
    Ok(out)
}

fn u64_tensor(v: u64) -> Tensor<f32> {
    let limbs = (0..4).map(|i| ((v >> (16 * i)) & 0xffff) as f32).collect();
    Tensor::new(&[4], limbs).unwrap()
}

fn tensor_u64(name: &str, t: &Tensor<f32>) -> Result<u64> {
    if t.shape() != [4] || t.data().iter().any(|&x| !(0.0..65536.0).contains(&x) || x.fract() != 0.0) {
        bail!(Format, "tensor '{name}' is not a valid counter");
    }
    Ok(t.data().iter().enumerate().map(|(i, &x)| (x as u64) << (16 * i)).sum())
}

/// Complete training state at a step boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub config: TrainConfig,
    pub params: ModelParams<f32>,
    pub optim: OptimState<f32>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut named: Vec<(String, Tensor<f32>)> = Vec::new();
        named.push(("meta.version".into(), Tensor::new(&[1], vec![FORMAT_VERSION])?));
        named.push(("meta.step".into(), u64_tensor(self.step)));
        let text = self.config.to_text();
        named.push(("meta.config".into(), Tensor::new(&[text.len()], text.bytes().map(f32::from).collect())?));
        for (name, t) in self.params.iter() {
            named.push((name.to_string(), t.clone()));
        }
        named.push(("adam.t".into(), u64_tensor(self.optim.t)));
        for (i, name) in self.params.names().iter().enumerate() {
            named.push((format!("adam.m.{name}"), self.optim.m[i].clone()));
            named.push((format!("adam.v.{name}"), self.optim.v[i].clone()));
        }
        encode_tensors(&named)
    }

    /// Decodes a checkpoint against its own stored configuration.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::decode(bytes, None)
    }

    /// Decodes a checkpoint whose model must match `expected`; the
    /// expected configuration replaces the stored one.
    pub fn from_bytes_for(bytes: &[u8], expected: &TrainConfig) -> Result<Self> {
        Self::decode(bytes, Some(expected))
    }

    fn decode(bytes: &[u8], expected: Option<&TrainConfig>) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        let mut model: Vec<(String, Tensor<f32>)> = Vec::new();
        let mut moments = std::collections::HashMap::new();
        for (name, t) in decode_tensors(bytes)? {
            if name.starts_with("meta.") || name == "adam.t" {
                meta.insert(name, t);
            } else if let Some(rest) = name.strip_prefix("adam.") {
                moments.insert(rest.to_string(), t);
            } else {
                model.push((name, t));
            }
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| crate::Error::Format(format!("missing tensor '{k}'")));
        if get("meta.version")?.data() != [FORMAT_VERSION] {
            bail!(Format, "unsupported checkpoint version {:?}", get("meta.version")?.data());
        }
        let step = tensor_u64("meta.step", get("meta.step")?)?;
        let t = tensor_u64("adam.t", get("adam.t")?)?;
        let text: Vec<u8> = get("meta.config")?.data().iter().map(|&x| x as u8).collect();
        let Ok(text) = String::from_utf8(text) else {
            bail!(Format, "stored configuration is not UTF-8");
        };
        let stored = TrainConfig::parse(&text).map_err(|e| crate::Error::Format(format!("stored configuration: {e}")))?;
        let config = expected.cloned().unwrap_or(stored);
        let params = ModelParams::from_named(&config.model, model)?;
        let mut m = Vec::with_capacity(params.len());
        let mut v = Vec::with_capacity(params.len());
        for (name, p) in params.iter() {
            for (kind, dst) in [("m", &mut m), ("v", &mut v)] {
                let key = format!("{kind}.{name}");
                let Some(t) = moments.remove(&key) else {
                    bail!(Format, "missing tensor 'adam.{key}'");
                };
                if t.shape() != p.shape() {
                    bail!(Format, "tensor 'adam.{key}' has shape {:?}, expected {:?}", t.shape(), p.shape());
                }
                dst.push(t);
            }
        }
        if let Some(extra) = moments.keys().min() {
            bail!(Format, "tensor 'adam.{extra}' does not match any parameter");
        }
        let optim = OptimState { config: config.adam.clone(), t, m, v };
        Ok(Self { step, config, params, optim })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn load_for(path: &Path, expected: &TrainConfig) -> Result<Self> {
        Self::from_bytes_for(&std::fs::read(path)?, expected)
    }
}
