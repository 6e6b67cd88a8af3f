//! `RMLD` dataset files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic     b"RMLD"
//! version   u32
//! count     u64
//! frame_len u32   always 128
//! count x { mod_id u8, snr_db i8, 256 x f32 (I row then Q row) }
//! ```

use std::fs;
use std::path::Path;

use crate::dataset::{validate_snr, Dataset, Example, IqFrame, Modulation, DEFAULT_SPLIT_SEED, FRAME_LEN, FRAME_VALUES};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"RMLD";
pub const DATASET_VERSION: u32 = 1;
pub const DATASET_HEADER_LEN: usize = 4 + 4 + 8 + 4;
pub const DATASET_RECORD_LEN: usize = 2 + FRAME_VALUES * 4;

fn malformed(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "dataset file",
        detail: detail.into(),
    }
}

pub fn encode_dataset(examples: &[Example]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(DATASET_HEADER_LEN + examples.len() * DATASET_RECORD_LEN);
    buf.extend_from_slice(&DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&(examples.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(FRAME_LEN as u32).to_le_bytes());
    for e in examples {
        buf.push(e.modulation.id());
        buf.push(e.snr_db as i8 as u8);
        for v in e.frame.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<Example>> {
    if bytes.len() < DATASET_HEADER_LEN {
        return Err(malformed(format!("truncated header ({} bytes)", bytes.len())));
    }
    if bytes[..4] != DATASET_MAGIC {
        return Err(malformed("bad magic (expected RMLD)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != DATASET_VERSION {
        return Err(Error::Version {
            what: "dataset file",
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let frame_len = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes"));
    if frame_len as usize != FRAME_LEN {
        return Err(malformed(format!("frame_len {frame_len}, expected {FRAME_LEN}")));
    }
    let body = &bytes[DATASET_HEADER_LEN..];
    let want = (count as u128) * DATASET_RECORD_LEN as u128;
    if (body.len() as u128) != want {
        return Err(malformed(format!(
            "header declares {count} records ({want} bytes) but body has {} bytes{}",
            body.len(),
            if (body.len() as u128) < want { " (truncated)" } else { "" }
        )));
    }
    body.chunks_exact(DATASET_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let modulation =
                Modulation::from_id(rec[0]).ok_or_else(|| malformed(format!("record {i}: bad mod_id {}", rec[0])))?;
            let snr_db = rec[1] as i8 as i32;
            validate_snr(snr_db).map_err(|e| malformed(format!("record {i}: {e}")))?;
            let values = rec[2..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let frame = IqFrame::new(values).map_err(|e| malformed(format!("record {i}: {e}")))?;
            Ok(Example {
                frame,
                modulation,
                snr_db,
            })
        })
        .collect()
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dataset(ds.examples())).map_err(|e| Error::io(path, e))
}

/// Reads a dataset file and applies the default split.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Dataset::new(decode_dataset(&bytes)?, DEFAULT_SPLIT_SEED))
}
