//! Binary field snapshots.
//!
//! Layout, little-endian: magic `GBBM`, `u32` version, `u32` n_modes,
//! `f64` length, then n_modes `f64` point values. A sidecar file with the
//! extension `.meta` holds `key = value` lines (time, parameters, config).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::spectral::{Grid, RealField};

pub const MAGIC: &[u8; 4] = b"GBBM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

pub fn encode(field: &RealField<f64>) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.n_modes());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n_modes() as u32).to_le_bytes());
    out.extend_from_slice(&grid.length().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<RealField<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let length = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = HEADER_LEN + 8 * n;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {n} modes, got {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let grid = Grid::new(n, length).map_err(|e| Error::Format(e.to_string()))?;
    RealField::new(&grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write(path: &Path, field: &RealField<f64>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::File::create(path)?.write_all(&encode(field))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<RealField<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn metadata_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Writes `key = value` lines. Values must not contain newlines.
pub fn write_metadata(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::Format(format!(
                "metadata entry {k:?} is not a single line"
            )));
        }
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(metadata_path(path), text)?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(metadata_path(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once(" = ")
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Format(format!("bad metadata line {l:?}")))
        })
        .collect()
}
