//! Bundle files.
//!
//! Layout (little-endian): magic `OMMB`, u32 version, u32 length + UTF-8 JSON
//! config snapshot, u32 tensor count, then per tensor: u32 name length, name,
//! u32 rank, u32 dims, float64 payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, InputMode, Layout, ModelBundle};
use crate::data::Scalers;
use crate::error::{Error, Result};

pub const BUNDLE_MAGIC: &[u8; 4] = b"OMMB";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    arch: Architecture,
    seed: u64,
    input_mode: InputMode,
    attribute_schema: Vec<String>,
    scalers: Option<Scalers>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_bundle(b: &ModelBundle) -> Vec<u8> {
    let snap = Snapshot {
        arch: b.arch.clone(),
        seed: b.seed,
        input_mode: b.input_mode,
        attribute_schema: b.attribute_schema.clone(),
        scalers: b.scalers.clone(),
    };
    let cfg = serde_json::to_string_pretty(&snap).expect("snapshot serializes");
    let mut out = Vec::new();
    out.extend_from_slice(BUNDLE_MAGIC);
    out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    put_u32(&mut out, cfg.len());
    out.extend_from_slice(cfg.as_bytes());
    put_u32(&mut out, b.layout.entries.len());
    for e in &b.layout.entries {
        put_u32(&mut out, e.name.len());
        out.extend_from_slice(e.name.as_bytes());
        put_u32(&mut out, e.shape.len());
        for &d in &e.shape {
            put_u32(&mut out, d);
        }
        for v in &b.params[e.offset..e.offset + e.len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Bundle("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != BUNDLE_MAGIC {
        return Err(Error::Bundle("bad magic bytes".into()));
    }
    let version = r.u32()? as u32;
    if version != BUNDLE_VERSION {
        return Err(Error::Bundle(format!(
            "bundle version {version} is not supported (reader version {BUNDLE_VERSION})"
        )));
    }
    let n = r.u32()?;
    let cfg = std::str::from_utf8(r.take(n)?)
        .map_err(|_| Error::Bundle("config snapshot is not UTF-8".into()))?;
    let snap: Snapshot =
        serde_json::from_str(cfg).map_err(|e| Error::Bundle(format!("config snapshot: {e}")))?;
    snap.arch.validate()?;
    let layout = Layout::for_arch(&snap.arch);
    let count = r.u32()?;
    if count != layout.entries.len() {
        return Err(Error::Bundle(format!(
            "expected {} tensors, file has {count}",
            layout.entries.len()
        )));
    }
    let mut params = vec![0.0; layout.total];
    for e in &layout.entries {
        let nl = r.u32()?;
        let name = std::str::from_utf8(r.take(nl)?)
            .map_err(|_| Error::Bundle("tensor name is not UTF-8".into()))?;
        if name != e.name {
            return Err(Error::Bundle(format!("expected tensor `{}`, found `{name}`", e.name)));
        }
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if dims != e.shape {
            return Err(Error::Bundle(format!(
                "tensor `{name}` has shape {dims:?}, expected {:?}",
                e.shape
            )));
        }
        let payload = r.take(8 * e.len)?;
        for (p, chunk) in params[e.offset..e.offset + e.len].iter_mut().zip(payload.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Bundle("trailing bytes after last tensor".into()));
    }
    Ok(ModelBundle {
        arch: snap.arch,
        seed: snap.seed,
        input_mode: snap.input_mode,
        attribute_schema: snap.attribute_schema,
        scalers: snap.scalers,
        layout,
        params,
    })
}

pub fn save_bundle(b: &ModelBundle, path: &Path) -> Result<()> {
    fs::write(path, encode_bundle(b)).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bundle(&bytes)
}
