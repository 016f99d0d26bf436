use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::protocol::ProtocolEntry;
use crate::text::{pool_text_vector, TextEmbedding};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetaExample {
    pub utt_id: String,
    pub base_scores: Vec<f64>,
    pub text_feat: Vec<f64>,
    /// 1 for bonafide, 0 for spoof.
    pub target: Option<f64>,
}

impl MetaExample {
    /// Base scores followed by the pooled text vector.
    pub fn features(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.base_scores.len() + self.text_feat.len());
        v.extend_from_slice(&self.base_scores);
        v.extend_from_slice(&self.text_feat);
        v
    }
}

/// Align B score sets by utterance id, in protocol order.
pub fn build_meta_examples(
    score_sets: &[Vec<(String, f64)>],
    embeddings: &BTreeMap<String, TextEmbedding>,
    protocol: &[ProtocolEntry],
) -> Result<Vec<MetaExample>> {
    if score_sets.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one score set is required".into(),
        ));
    }
    let mut maps: Vec<BTreeMap<&str, f64>> = Vec::with_capacity(score_sets.len());
    for set in score_sets {
        let mut m = BTreeMap::new();
        for (id, s) in set {
            if !s.is_finite() {
                return Err(Error::NonFinite("base score"));
            }
            if m.insert(id.as_str(), *s).is_some() {
                return Err(Error::DuplicateUtt(id.clone()));
            }
        }
        maps.push(m);
    }
    let first: BTreeSet<&str> = maps[0].keys().copied().collect();
    for (b, m) in maps.iter().enumerate().skip(1) {
        if let Some(id) = m
            .keys()
            .find(|k| !first.contains(*k))
            .or_else(|| first.iter().find(|k| !m.contains_key(*k)))
        {
            return Err(Error::CoverageMismatch(alloc::format!(
                "score set {b} disagrees with set 0 on {id}"
            )));
        }
    }
    let known: BTreeSet<&str> = protocol.iter().map(|e| e.utt_id.as_str()).collect();
    if let Some(id) = first.iter().find(|id| !known.contains(*id)) {
        return Err(Error::UnknownUtt(String::from(*id)));
    }
    let mut out = Vec::with_capacity(first.len());
    for entry in protocol
        .iter()
        .filter(|e| first.contains(e.utt_id.as_str()))
    {
        let id = entry.utt_id.as_str();
        let emb = embeddings
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(entry.utt_id.clone()))?;
        out.push(MetaExample {
            utt_id: entry.utt_id.clone(),
            base_scores: maps.iter().map(|m| m[id]).collect(),
            text_feat: pool_text_vector(emb),
            target: Some(entry.label.target()),
        });
    }
    Ok(out)
}
