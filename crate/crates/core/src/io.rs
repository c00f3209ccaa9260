//! The `MGR1` grid file format.
//!
//! Layout: the bytes `MGR1`, one byte for the dimension, one byte for the
//! resolution `K`, then `2^{nK}` little-endian `f64` cell masses, first
//! coordinate fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{max_level, MassGrid};

const MAGIC: &[u8; 4] = b"MGR1";
const HEADER: usize = 6;

pub fn encode(grid: &MassGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * grid.cells().len());
    out.extend_from_slice(MAGIC);
    out.push(grid.dim() as u8);
    out.push(grid.level() as u8);
    for v in grid.cells() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<MassGrid> {
    if bytes.len() < HEADER {
        if !MAGIC.starts_with(&bytes[..bytes.len().min(4)]) {
            return Err(Error::BadMagic);
        }
        return Err(Error::Truncated { expected: HEADER, found: bytes.len() });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let dim = bytes[4] as usize;
    let level = bytes[5] as u32;
    if !(1..=2).contains(&dim) {
        return Err(Error::Dimension(dim));
    }
    let max = max_level(dim);
    if level > max {
        return Err(Error::Resolution { dim, level, max });
    }
    let count = 1usize << (dim as u32 * level);
    let expected = HEADER + 8 * count;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingData { expected, found: bytes.len() });
    }
    let cells = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    MassGrid::new(dim, level, cells)
}

pub fn save_grid(grid: &MassGrid, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(grid))?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<MassGrid> {
    decode(&fs::read(path)?)
}
