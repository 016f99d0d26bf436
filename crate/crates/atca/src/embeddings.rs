//! Embedding store: every utterance's `L × Dt` rows stacked in one ATFX
//! payload, plus an index JSONL giving each utterance's row offset and style
//! spans.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use atca_core::text::{Style, StyleSpan, TextEmbedding};
use serde::{Deserialize, Serialize};

use crate::atfx;
use crate::error::{Error, Result};

pub const PAYLOAD: &str = "payload.atfx";
pub const INDEX: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub utt_id: String,
    /// First row of this utterance in the payload.
    pub offset: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Dt")]
    pub dt: usize,
    pub spans: Vec<(String, usize, usize)>,
}

pub fn paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(PAYLOAD), dir.join(INDEX))
}

/// Encode `(payload bytes, index text)`. All embeddings must share `Dt`.
pub fn encode_store(embs: &[TextEmbedding]) -> Result<(Vec<u8>, String)> {
    let dt = embs.first().map_or(0, TextEmbedding::dim);
    let mut values = Vec::new();
    let mut index = String::new();
    let mut offset = 0;
    for e in embs {
        if e.dim() != dt {
            return Err(atca_core::Error::DimMismatch {
                expected: dt,
                got: e.dim(),
            }
            .into());
        }
        let entry = IndexEntry {
            utt_id: e.utt_id().to_string(),
            offset,
            l: e.rows(),
            dt,
            spans: e
                .spans()
                .iter()
                .map(|s| (s.style.as_str().to_string(), s.start, s.end))
                .collect(),
        };
        index.push_str(&serde_json::to_string(&entry).expect("index entries serialise"));
        index.push('\n');
        values.extend_from_slice(e.values());
        offset += e.rows();
    }
    Ok((atfx::encode_matrix(offset, dt, &values), index))
}

pub fn write_store(dir: &Path, embs: &[TextEmbedding]) -> Result<()> {
    let (payload, index) = encode_store(embs)?;
    let (p, i) = paths(dir);
    fs::write(&p, payload).map_err(Error::io(&p))?;
    fs::write(&i, index).map_err(Error::io(&i))
}

pub fn decode_store(
    payload: &[u8],
    index: &str,
    payload_path: &Path,
    index_path: &Path,
) -> Result<Vec<TextEmbedding>> {
    let (rows, cols, values) = atfx::decode_matrix(payload, payload_path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in index.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: String| Error::BadJson {
            path: index_path.into(),
            line: i + 1,
            why,
        };
        let e: IndexEntry = serde_json::from_str(line).map_err(|err| bad(err.to_string()))?;
        if e.dt != cols {
            return Err(bad(format!(
                "Dt {} does not match payload width {cols}",
                e.dt
            )));
        }
        if e.offset + e.l > rows {
            return Err(bad(format!(
                "rows {}..{} exceed payload rows {rows}",
                e.offset,
                e.offset + e.l
            )));
        }
        let mut spans = Vec::with_capacity(e.spans.len());
        for (style, start, end) in &e.spans {
            let style = Style::parse(style).ok_or_else(|| Error::UnknownStyle {
                path: index_path.into(),
                line: i + 1,
                style: style.clone(),
            })?;
            spans.push(StyleSpan {
                style,
                start: *start,
                end: *end,
            });
        }
        if !seen.insert(e.utt_id.clone()) {
            return Err(atca_core::Error::DuplicateUtt(e.utt_id).into());
        }
        let slice = values[e.offset * cols..(e.offset + e.l) * cols].to_vec();
        out.push(TextEmbedding::new(e.utt_id, e.l, cols, slice, spans)?);
    }
    Ok(out)
}

pub fn load_store(dir: &Path) -> Result<Vec<TextEmbedding>> {
    let (p, i) = paths(dir);
    let payload = fs::read(&p).map_err(Error::io(&p))?;
    let index = fs::read_to_string(&i).map_err(Error::io(&i))?;
    decode_store(&payload, &index, &p, &i)
}

pub fn load_map(dir: &Path) -> Result<BTreeMap<String, TextEmbedding>> {
    Ok(load_store(dir)?
        .into_iter()
        .map(|e| (e.utt_id().to_string(), e))
        .collect())
}
