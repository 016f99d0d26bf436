//! "ATCK" checkpoints: magic, u32 version, u32-length-prefixed config JSON,
//! u32 tensor count, then per tensor (u32 name length, name, u32 rank, u32
//! dims, f64 LE payload) in enumeration order.

use std::fs;
use std::path::Path;

use atca_core::atca::{AtcaConfig, AtcaParams};
use atca_core::autodiff::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ATCK";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint(p: &AtcaParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(&p.config).expect("config serialises");
    put_u32(&mut out, cfg.len());
    out.extend_from_slice(&cfg);
    let tensors = p.named_tensors();
    put_u32(&mut out, tensors.len());
    for (name, t) in tensors {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, 2);
        put_u32(&mut out, t.rows());
        put_u32(&mut out, t.cols());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedFile(self.path.into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<AtcaParams> {
    let bad = |why: String| Error::BadHeader {
        path: path.into(),
        why,
    };
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != MAGIC {
        return Err(bad("magic is not ATCK".into()));
    }
    let version = r.u32()?;
    if version as u32 != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = r.u32()?;
    let config: AtcaConfig =
        serde_json::from_slice(r.take(len)?).map_err(|e| bad(format!("config: {e}")))?;
    let n = r.u32()?;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| bad("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()?;
        if rank != 2 {
            return Err(bad(format!("tensor {name} has rank {rank}, expected 2")));
        }
        let (rows, cols) = (r.u32()?, r.u32()?);
        let payload = r.take(rows * cols * 8)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.push((name, Tensor::new(rows, cols, data)?));
    }
    if r.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(AtcaParams::from_named(config, tensors)?)
}

pub fn save_checkpoint(path: &Path, p: &AtcaParams) -> Result<()> {
    fs::write(path, encode_checkpoint(p)).map_err(Error::io(path))
}

pub fn load_checkpoint(path: &Path) -> Result<AtcaParams> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode_checkpoint(&bytes, path)
}
