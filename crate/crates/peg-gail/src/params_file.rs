//! Parameter vectors as a standalone binary blob:
//!
//! ```text
//! b"PGPARAMS"  u32 version  u64 layout hash  u64 init seed
//! u64 n, n × u64 layer offsets
//! u64 m, m × f64 values
//! u32 crc32 of all preceding bytes
//! ```
//!
//! All integers and floats little-endian.

use crate::codec::{self, Reader, Writer};
use crate::{Error, Result};
use peg_gail_core::nn::{LayerSpec, ParamSet};
use std::path::Path;

pub const PARAMS_MAGIC: &[u8; 8] = b"PGPARAMS";
pub const PARAMS_VERSION: u32 = 1;
pub const PARAMS_EXT: &str = "pgps";

/// FNV-1a over the JSON form of the layer list.
pub fn layout_hash(layers: &[LayerSpec]) -> u64 {
    let json = serde_json::to_vec(layers).expect("layer specs serialize");
    json.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn params_to_bytes(params: &ParamSet, layers: &[LayerSpec]) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(PARAMS_MAGIC);
    w.u32(PARAMS_VERSION);
    w.u64(layout_hash(layers));
    w.u64(params.init_seed);
    w.u64(params.offsets.len() as u64);
    for &o in &params.offsets {
        w.u64(o as u64);
    }
    w.f64s(&params.values);
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    w.buf
}

/// Decodes a blob and checks it was written for `layers`.
pub fn params_from_bytes(bytes: &[u8], layers: &[LayerSpec]) -> Result<ParamSet> {
    let mut r = Reader::new(bytes);
    if r.take(8).map_err(|_| Error::WrongKind { expected: "parameter" })? != PARAMS_MAGIC {
        return Err(Error::WrongKind { expected: "parameter" });
    }
    let version = r.u32()?;
    if version != PARAMS_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: PARAMS_VERSION,
        });
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated);
    }
    let split = bytes.len() - 4;
    let hash = r.u64()?;
    let init_seed = r.u64()?;
    let n = r.len(8)?;
    let offsets = (0..n).map(|_| r.u64().map(|o| o as usize)).collect::<Result<Vec<_>>>()?;
    let values = r.f64s()?;
    if r.remaining() != 4 {
        return Err(if r.remaining() < 4 {
            Error::Truncated
        } else {
            Error::Malformed("trailing bytes".into())
        });
    }
    let stored = r.u32()?;
    if crc32fast::hash(&bytes[..split]) != stored {
        return Err(Error::Checksum);
    }
    let expected = layout_hash(layers);
    if hash != expected {
        return Err(Error::SpecMismatch { found: hash, expected });
    }
    let count: usize = layers.iter().map(LayerSpec::param_count).sum();
    if values.len() != count {
        return Err(peg_gail_core::Error::ShapeMismatch {
            expected: count,
            actual: values.len(),
        }
        .into());
    }
    Ok(ParamSet {
        values,
        offsets,
        init_seed,
    })
}

pub fn save_params(params: &ParamSet, layers: &[LayerSpec], path: &Path) -> Result<()> {
    codec::write_atomic(path, &params_to_bytes(params, layers))
}

pub fn load_params(path: &Path, layers: &[LayerSpec]) -> Result<ParamSet> {
    params_from_bytes(&codec::read_file(path)?, layers)
}
