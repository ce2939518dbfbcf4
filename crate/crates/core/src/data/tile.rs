//! Binary tile files.
//!
//! Layout (little-endian): magic `OMTL`, u32 version, u32 channels,
//! u32 height, u32 width, then `channels * height * width` float32 values,
//! channel-major then row-major.

use std::fs;
use std::path::Path;

use super::ImageTile;
use crate::error::{Error, Result};

pub const TILE_MAGIC: &[u8; 4] = b"OMTL";
pub const TILE_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn encode_tile(tile: &ImageTile) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * tile.values.len());
    out.extend_from_slice(TILE_MAGIC);
    out.extend_from_slice(&TILE_VERSION.to_le_bytes());
    for d in [tile.channels, tile.height, tile.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &tile.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_tile(bytes: &[u8]) -> std::result::Result<ImageTile, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("file too short ({} bytes)", bytes.len()));
    }
    if &bytes[0..4] != TILE_MAGIC {
        return Err("bad magic bytes".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let version = word(1);
    if version != TILE_VERSION {
        return Err(format!("unsupported tile version {version}"));
    }
    let (c, h, w) = (word(2) as usize, word(3) as usize, word(4) as usize);
    let n = c
        .checked_mul(h)
        .and_then(|x| x.checked_mul(w))
        .ok_or("tile dims overflow")?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * n {
        return Err(format!(
            "header declares {c}x{h}x{w} = {n} values but payload holds {} bytes",
            payload.len()
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    ImageTile::new(c, h, w, values).map_err(|e| e.to_string())
}

pub fn write_tile(path: &Path, tile: &ImageTile) -> Result<()> {
    fs::write(path, encode_tile(tile)).map_err(|e| Error::io(path, e))
}

pub fn read_tile(path: &Path) -> Result<ImageTile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tile(&bytes).map_err(|msg| Error::Tile {
        path: path.to_path_buf(),
        msg,
    })
}
