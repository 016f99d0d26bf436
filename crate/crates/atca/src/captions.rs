//! Caption JSONL: `{"utt_id": str, "captions": {style: str, ...}}` per line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use atca_core::text::{CaptionSet, Style};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub fn encode_captions(sets: &[CaptionSet]) -> String {
    let mut out = String::new();
    for c in sets {
        let caps: serde_json::Map<String, Value> = c
            .captions
            .iter()
            .map(|(s, t)| (s.as_str().to_string(), Value::String(t.clone())))
            .collect();
        out.push_str(&json!({ "utt_id": c.utt_id, "captions": caps }).to_string());
        out.push('\n');
    }
    out
}

pub fn write_captions(path: &Path, sets: &[CaptionSet]) -> Result<()> {
    fs::write(path, encode_captions(sets)).map_err(Error::io(path))
}

pub fn decode_captions(text: &str, path: &Path) -> Result<Vec<CaptionSet>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: String| Error::BadJson {
            path: path.into(),
            line: line_no,
            why,
        };
        let v: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let utt_id = v
            .get("utt_id")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field utt_id".into()))?;
        let caps = v
            .get("captions")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing object field captions".into()))?;
        let mut captions = BTreeMap::new();
        for (k, t) in caps {
            let style = Style::parse(k).ok_or_else(|| Error::UnknownStyle {
                path: path.into(),
                line: line_no,
                style: k.clone(),
            })?;
            let t = t
                .as_str()
                .ok_or_else(|| bad(format!("caption for {k} is not a string")))?;
            captions.insert(style, t.to_string());
        }
        if !seen.insert(utt_id.to_string()) {
            return Err(atca_core::Error::DuplicateUtt(utt_id.to_string()).into());
        }
        out.push(CaptionSet {
            utt_id: utt_id.to_string(),
            captions,
        });
    }
    Ok(out)
}

pub fn load_captions(path: &Path) -> Result<Vec<CaptionSet>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    decode_captions(&text, path)
}
