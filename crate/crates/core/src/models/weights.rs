//! `ADVW` weight files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic   b"ADVW"
//! version u32
//! count   u32                      number of tensors
//! count x {
//!     name_len u32, name (UTF-8)
//!     rank     u32, dims (u32 x rank)
//!     payload  f32 x product(dims), row-major
//! }
//! ```
//!
//! Each Conv2D/Dense layer contributes `<layer>/kernel` then `<layer>/bias`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Model, Params, Tensor};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"ADVW";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor<f32>,
}

fn named(model: &Model) -> Vec<NamedTensor> {
    let mut out = Vec::new();
    for (i, p) in model.params().iter().enumerate() {
        if let Some(p) = p {
            let layer = model.layer_name(i);
            out.push(NamedTensor {
                name: format!("{layer}/kernel"),
                tensor: p.kernel.clone(),
            });
            out.push(NamedTensor {
                name: format!("{layer}/bias"),
                tensor: p.bias.clone(),
            });
        }
    }
    out
}

pub fn encode_weights(model: &Model) -> Vec<u8> {
    let tensors = named(model);
    let mut buf = Vec::with_capacity(12 + model.param_count() * 4);
    buf.extend_from_slice(&WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        buf.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(t.name.as_bytes());
        let dims = t.tensor.shape();
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format {
                what: "weights file",
                detail: format!("truncated while reading {what} at byte {}", self.pos),
            });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(Error::Format {
            what: "weights file",
            detail: "bad magic (expected ADVW)".into(),
        });
    }
    let version = r.u32("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Version {
            what: "weights file",
            found: version,
            expected: WEIGHTS_VERSION,
        });
    }
    let count = r.u32("tensor count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|e| Error::Format {
                what: "weights file",
                detail: format!("tensor name is not UTF-8: {e}"),
            })?
            .to_owned();
        let rank = r.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dims")? as usize);
        }
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::Format {
            what: "weights file",
            detail: format!("dims of `{name}` overflow"),
        })?;
        let payload = r.take(len.saturating_mul(4), &format!("payload of `{name}`"))?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let tensor = Tensor::new(dims, data).map_err(|e| Error::Format {
            what: "weights file",
            detail: format!("tensor `{name}`: {e}"),
        })?;
        out.push(NamedTensor { name, tensor });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            what: "weights file",
            detail: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(out)
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_weights(model)).map_err(|e| Error::io(path, e))
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<Vec<NamedTensor>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

/// Replaces `model`'s weights with those in `tensors`, which must match the
/// architecture's names and dimensions exactly.
pub fn assign_weights(model: &mut Model, tensors: Vec<NamedTensor>) -> Result<()> {
    let expected = named(model);
    if expected.len() != tensors.len() {
        return Err(Error::Format {
            what: "weights file",
            detail: format!(
                "architecture has {} tensors, file has {}",
                expected.len(),
                tensors.len()
            ),
        });
    }
    for (e, t) in expected.iter().zip(&tensors) {
        if e.name != t.name {
            return Err(Error::Format {
                what: "weights file",
                detail: format!("expected tensor `{}`, found `{}`", e.name, t.name),
            });
        }
        if e.tensor.shape() != t.tensor.shape() {
            return Err(Error::shape(format!("weights `{}`", e.name), e.tensor.shape(), t.tensor.shape()));
        }
    }
    let mut it = tensors.into_iter();
    for p in model.params_mut().iter_mut().flatten() {
        let kernel = it.next().expect("counted").tensor;
        let bias = it.next().expect("counted").tensor;
        *p = Params { kernel, bias };
    }
    Ok(())
}

pub fn load_weights(model: &mut Model, path: impl AsRef<Path>) -> Result<()> {
    let tensors = read_weights(path)?;
    assign_weights(model, tensors)
}
