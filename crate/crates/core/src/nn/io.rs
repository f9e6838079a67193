//! `TEN1` tensor blobs: the magic `TEN1`, little-endian `u32` rank, one
//! `u32` per dimension, then the values as little-endian `f32`, row-major.

use std::fs;
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"TEN1";

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let corrupt = |reason: String| Error::CorruptFile {
        path: path.to_path_buf(),
        reason,
    };
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| corrupt("header truncated".into()))
    };
    if bytes.get(..4) != Some(TENSOR_MAGIC.as_slice()) {
        return Err(corrupt("bad magic".into()));
    }
    let rank = word(4)? as usize;
    if rank == 0 || rank > 4 {
        return Err(corrupt(format!("unsupported rank {rank}")));
    }
    let shape = (0..rank)
        .map(|i| word(8 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| corrupt("dimensions overflow".into()))?;
    let body = &bytes[8 + 4 * rank..];
    if body.len() != n * 4 {
        return Err(corrupt(format!("expected {} data bytes, found {}", n * 4, body.len())));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Tensor::from_vec(&shape, data).map_err(|e| corrupt(e.to_string()))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    fs::write(path, encode_tensor(t))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    decode_tensor(&fs::read(path)?, path)
}
