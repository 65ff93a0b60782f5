//! Binary key files.
//!
//! Both formats start with a little-endian `u64` count followed by that
//! many 8-byte little-endian values: unsigned integers for raw datasets
//! (the SOSD layout), IEEE-754 doubles for normalized arrays.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::keys::SortedKeyArray;

fn split_payload(bytes: &[u8]) -> Result<(u64, &[u8])> {
    let Some((head, body)) = bytes.split_first_chunk::<8>() else {
        return Err(Error::BadHeader(format!(
            "file has {} bytes, need at least 8",
            bytes.len()
        )));
    };
    let count = u64::from_le_bytes(*head);
    let found = (body.len() / 8) as u64;
    if found < count {
        return Err(Error::TruncatedFile {
            expected: count,
            found,
        });
    }
    if body.len() as u64 != count * 8 {
        return Err(Error::BadHeader(format!(
            "header announces {count} keys but payload holds {} bytes",
            body.len()
        )));
    }
    Ok((count, body))
}

pub fn decode_raw_keys(bytes: &[u8]) -> Result<Vec<u64>> {
    let (_, body) = split_payload(bytes)?;
    Ok(body
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn encode_raw_keys(keys: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * keys.len());
    out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
    for k in keys {
        out.extend_from_slice(&k.to_le_bytes());
    }
    out
}

pub fn read_raw_keys(path: &Path) -> Result<Vec<u64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raw_keys(&bytes)
}

pub fn write_raw_keys(path: &Path, keys: &[u64]) -> Result<()> {
    fs::write(path, encode_raw_keys(keys)).map_err(|e| Error::io(path, e))
}

/// Decodes a normalized-array file into a unit-domain array.
pub fn decode_normalized(bytes: &[u8]) -> Result<SortedKeyArray> {
    let (_, body) = split_payload(bytes)?;
    let keys = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    SortedKeyArray::unit(keys)
}

pub fn encode_normalized(a: &SortedKeyArray) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * a.len());
    out.extend_from_slice(&(a.len() as u64).to_le_bytes());
    for k in a.keys() {
        out.extend_from_slice(&k.to_le_bytes());
    }
    out
}

pub fn read_normalized(path: &Path) -> Result<SortedKeyArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_normalized(&bytes)
}

pub fn write_normalized(path: &Path, a: &SortedKeyArray) -> Result<()> {
    fs::write(path, encode_normalized(a)).map_err(|e| Error::io(path, e))
}
