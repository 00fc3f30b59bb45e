//! Encoder checkpoint file.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `DCLRENC1` |
//! | 4     | format version (`u32`, currently 1) |
//! | 8     | header length `L` (`u64`) |
//! | L     | UTF-8 JSON header: architecture, layer shapes, seed, attribute, config |
//! | rest  | parameters as `f64`: per layer, weights row-major (`fan_in × fan_out`), then bias |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::encoder::{Architecture, EncoderParams};
use super::train::TrainConfig;
use crate::dataset::SensitiveAttribute;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DCLRENC1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub attribute: Option<SensitiveAttribute>,
    pub config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    layer_shapes: Vec<(usize, usize)>,
    meta: CheckpointMeta,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_checkpoint(
    path: impl AsRef<Path>,
    params: &EncoderParams,
    meta: &CheckpointMeta,
) -> Result<()> {
    let path = path.as_ref();
    let header = serde_json::to_vec(&Header {
        architecture: params.architecture,
        layer_shapes: params.layers.iter().map(|l| l.weights.dim()).collect(),
        meta: meta.clone(),
    })?;
    let mut buf = Vec::with_capacity(20 + header.len() + 8 * params.parameter_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for layer in &params.layers {
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(EncoderParams, CheckpointMeta)> {
    let mut bytes = Vec::new();
    fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("not an encoder checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body_start = 20usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[20..body_start])?;
    let mut params = EncoderParams::zeros(header.architecture);
    let expected: Vec<(usize, usize)> = params.layers.iter().map(|l| l.weights.dim()).collect();
    if header.layer_shapes != expected {
        return Err(corrupt("layer shapes disagree with the architecture"));
    }
    let body = &bytes[body_start..];
    if body.len() != 8 * params.parameter_count() {
        return Err(corrupt(format!(
            "expected {} parameter bytes, found {}",
            8 * params.parameter_count(),
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for layer in &mut params.layers {
        let (r, c) = layer.weights.dim();
        layer.weights = Array2::from_shape_vec((r, c), values.by_ref().take(r * c).collect())
            .map_err(|e| corrupt(e.to_string()))?;
        layer.bias = Array1::from_iter(values.by_ref().take(c));
    }
    if !params.is_finite() {
        return Err(corrupt("non-finite parameter"));
    }
    Ok((params, header.meta))
}
