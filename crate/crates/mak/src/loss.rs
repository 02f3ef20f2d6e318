//! MAK-LOSS files.
//!
//! Layout, little-endian: `"MAKL"`, version `u32 = 1`, `n u64`, `M u32`,
//! flags `u32` (bit 0: raw matrix present), `n` ECLE values as f32, then
//! the optional `n × M` raw matrix row-major.

use std::fs;
use std::path::Path;

use mak_core::LossTable;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MAKL";
pub const VERSION: u32 = 1;
pub const FLAG_RAW: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4;

pub fn encode(table: &LossTable) -> Vec<u8> {
    let raw = table.raw();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * table.len() * (1 + table.repeats()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(table.len() as u64).to_le_bytes());
    out.extend_from_slice(&(table.repeats() as u32).to_le_bytes());
    out.extend_from_slice(&(if raw.is_some() { FLAG_RAW } else { 0 }).to_le_bytes());
    for v in table.ecle().iter().chain(raw.unwrap_or(&[])) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<LossTable> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::header(path, "file shorter than the header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::header(path, "bad magic, expected MAKL"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::header(path, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let m = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let flags = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
    if m == 0 {
        return Err(Error::header(path, "repeat count M is 0"));
    }
    if n == 0 {
        return Err(Error::header(path, "table has no rows"));
    }
    if flags & !FLAG_RAW != 0 {
        return Err(Error::header(path, format!("unknown flags {flags:#x}")));
    }
    let has_raw = flags & FLAG_RAW != 0;
    let expected = n
        .checked_mul(if has_raw { 1 + m as u64 } else { 1 })
        .ok_or_else(|| Error::header(path, "shape overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if !payload.len().is_multiple_of(4) || payload.len() as u64 / 4 != expected {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            expected,
            found: payload.len() as u64 / 4,
        });
    }
    let mut values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let raw = has_raw.then(|| values.split_off(n as usize));
    LossTable::new(values, raw, m as usize).map_err(|e| Error::invalid(path, e))
}

pub fn load_loss_table(path: &Path) -> Result<LossTable> {
    let bytes = fs::read(path).map_err(|e| Error::read(path, e))?;
    decode(&bytes, path)
}

pub fn save_loss_table(table: &LossTable, path: &Path) -> Result<()> {
    fs::write(path, encode(table)).map_err(|e| Error::write(path, e))
}
