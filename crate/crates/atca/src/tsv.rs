//! Headerless TSVs. Protocol: utt_id, wav path, label, generator_id, split.
//! Scores: utt_id, score with 6 decimals.

use std::fs;
use std::path::Path;

use atca_core::metrics::Trial;
use atca_core::protocol::{Label, ProtocolEntry, Split};

use crate::error::{Error, Result};

pub fn encode_protocol(entries: &[ProtocolEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.utt_id,
            e.wav_path,
            e.label.as_str(),
            e.generator_id,
            e.split.as_str()
        ));
    }
    out
}

pub fn decode_protocol(text: &str, path: &Path) -> Result<Vec<ProtocolEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |why: String| Error::BadTsv {
            path: path.into(),
            line: i + 1,
            why,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(bad(format!("expected 5 columns, found {}", cols.len())));
        }
        let label = Label::parse(cols[2])
            .ok_or_else(|| bad(format!("label {:?} is not bonafide/spoof", cols[2])))?;
        let split = Split::parse(cols[4])
            .ok_or_else(|| bad(format!("split {:?} is not train/dev/eval", cols[4])))?;
        out.push(ProtocolEntry {
            utt_id: cols[0].to_string(),
            wav_path: cols[1].to_string(),
            label,
            generator_id: cols[3].to_string(),
            split,
        });
    }
    Ok(out)
}

pub fn write_protocol(path: &Path, entries: &[ProtocolEntry]) -> Result<()> {
    fs::write(path, encode_protocol(entries)).map_err(Error::io(path))
}

pub fn load_protocol(path: &Path) -> Result<Vec<ProtocolEntry>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    decode_protocol(&text, path)
}

pub fn encode_scores<'a>(rows: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::new();
    for (id, s) in rows {
        out.push_str(&format!("{id}\t{s:.6}\n"));
    }
    out
}

pub fn encode_trials(trials: &[Trial]) -> String {
    encode_scores(trials.iter().map(|t| (t.utt_id.as_str(), t.score)))
}

pub fn decode_scores(text: &str, path: &Path) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |why: String| Error::BadTsv {
            path: path.into(),
            line: i + 1,
            why,
        };
        let (id, score) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected utt_id<TAB>score".into()))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| bad(format!("score {score:?} is not a number")))?;
        if !score.is_finite() {
            return Err(bad("score is not finite".into()));
        }
        out.push((id.to_string(), score));
    }
    Ok(out)
}

pub fn write_scores(path: &Path, trials: &[Trial]) -> Result<()> {
    fs::write(path, encode_trials(trials)).map_err(Error::io(path))
}

pub fn load_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    decode_scores(&text, path)
}
