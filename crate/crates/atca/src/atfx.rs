//! "ATFX" feature matrices: magic, u32 version, u32 rows, u32 cols, then
//! row-major little-endian f32.

use std::fs;
use std::path::Path;

use atca_core::dsp::{FeatureMatrix, Origin};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ATFX";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode_header(rows: usize, cols: usize) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..12].copy_from_slice(&(rows as u32).to_le_bytes());
    h[12..16].copy_from_slice(&(cols as u32).to_le_bytes());
    h
}

pub fn encode_matrix(rows: usize, cols: usize, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    out.extend_from_slice(&encode_header(rows, cols));
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    encode_matrix(f.rows(), f.cols(), f.values())
}

/// `(rows, cols, values)`; `path` is only used in error messages.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |why: &str| Error::BadHeader {
        path: path.into(),
        why: why.into(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad("shorter than the 16-byte header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("magic is not ATFX"));
    }
    let word = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    if word(4) != VERSION {
        return Err(bad(&format!("unsupported version {}", word(4))));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let payload = &bytes[HEADER_LEN..];
    let declared = rows.checked_mul(cols).and_then(|n| n.checked_mul(4));
    if declared != Some(payload.len()) {
        return Err(atca_core::Error::ShapeMismatch(format!(
            "{}: header declares {rows}x{cols} but payload holds {} bytes",
            path.display(),
            payload.len()
        ))
        .into());
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(atca_core::Error::NonFinite("feature file").into());
    }
    Ok((rows, cols, values))
}

pub fn write_features(path: &Path, f: &FeatureMatrix) -> Result<()> {
    fs::write(path, encode_features(f)).map_err(Error::io(path))
}

/// Load a feature file as an `external`-origin matrix.
pub fn load_external_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    let (rows, cols, values) = decode_matrix(&bytes, path)?;
    Ok(FeatureMatrix::new(rows, cols, values, Origin::External)?)
}
