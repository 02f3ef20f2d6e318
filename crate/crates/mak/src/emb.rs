//! MAK-EMB embedding files, their JSON sidecars, and the CSV fallback.
//!
//! Binary layout, little-endian: `"MAKE"`, version `u32 = 1`, dtype
//! `u32 = 0` (f32), `n u64`, `d u64`, then `n·d` f32 values row-major.
//! Labels live in `<path>.labels.json` and ids in `<path>.ids.json`.

use std::fs;
use std::path::{Path, PathBuf};

use mak_core::{DatasetRole, EmbeddingSet};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MAKE";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;
/// Largest row count accepted from a CSV file.
pub const CSV_MAX_ROWS: usize = 10_000;

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn labels_path(path: &Path) -> PathBuf {
    with_suffix(path, ".labels.json")
}

pub fn ids_path(path: &Path) -> PathBuf {
    with_suffix(path, ".ids.json")
}

pub fn encode(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + set.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    out.extend_from_slice(&(set.n() as u64).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u64).to_le_bytes());
    for v in set.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Parses a MAK-EMB byte buffer; `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<EmbeddingSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::header(path, "file shorter than the header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::header(path, "bad magic, expected MAKE"));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::header(path, format!("unsupported version {version}")));
    }
    let dtype = u32_at(bytes, 8);
    if dtype != DTYPE_F32 {
        return Err(Error::header(path, format!("unsupported dtype {dtype}")));
    }
    let n = u64_at(bytes, 12);
    let d = u64_at(bytes, 20);
    if n == 0 || d == 0 {
        return Err(Error::header(path, format!("empty shape {n}x{d}")));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = n.checked_mul(d).ok_or_else(|| Error::header(path, "shape overflows"))?;
    if !payload.len().is_multiple_of(4) || payload.len() as u64 / 4 != expected {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            expected,
            found: payload.len() as u64 / 4,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingSet::new(n as usize, d as usize, data).map_err(|e| Error::invalid(path, e))
}

fn parse_csv(text: &[u8], path: &Path) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text);
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rows.len() == CSV_MAX_ROWS {
            return Err(Error::parse(
                path,
                format!("CSV input is limited to {CSV_MAX_ROWS} rows; use the binary format"),
            ));
        }
        let row = record
            .iter()
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, format!("row {r}: {e}")))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    path,
                    format!("row {r} has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    EmbeddingSet::from_rows(&rows).map_err(|e| Error::invalid(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| Error::parse(path, e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::read(path, e)),
    }
}

/// Loads an embedding file (binary, or CSV when the extension is `.csv`)
/// with any label and id sidecars.
pub fn load_embeddings(path: &Path, role: DatasetRole) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::read(path, e))?;
    let set = if is_csv(path) {
        parse_csv(&bytes, path)?
    } else {
        decode(&bytes, path)?
    };
    let set = match read_json::<Vec<i64>>(&labels_path(path))? {
        Some(labels) => set
            .with_labels(labels)
            .map_err(|e| Error::invalid(&labels_path(path), e))?,
        None => set,
    };
    let set = match read_json::<Vec<String>>(&ids_path(path))? {
        Some(ids) => set.with_ids(ids).map_err(|e| Error::invalid(&ids_path(path), e))?,
        None => set,
    };
    if set.n() == 0 {
        return Err(Error::parse(path, format!("{role} set is empty")));
    }
    Ok(set)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::write(path, e))
}

/// Writes `set` in the binary format plus sidecars for its labels and ids.
pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    write_file(path, &encode(set))?;
    if let Some(labels) = set.labels() {
        let json = serde_json::to_vec(labels).map_err(|e| Error::Internal(e.to_string()))?;
        write_file(&labels_path(path), &json)?;
    }
    if let Some(ids) = set.ids() {
        let json = serde_json::to_vec(ids).map_err(|e| Error::Internal(e.to_string()))?;
        write_file(&ids_path(path), &json)?;
    }
    Ok(())
}
