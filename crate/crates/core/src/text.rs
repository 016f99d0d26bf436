//! Caption sets, the deterministic toy text embedder and text pooling.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::rng::{fnv1a64, SplitMix64};
use crate::{Error, Result};

/// Caption style. Declaration order is the fixed concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Audioset,
    Audiocaps,
    Clotho,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Audioset, Style::Audiocaps, Style::Clotho];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::Audioset => "audioset",
            Style::Audiocaps => "audiocaps",
            Style::Clotho => "clotho",
        }
    }

    pub fn parse(s: &str) -> Option<Style> {
        Style::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionSet {
    pub utt_id: String,
    pub captions: BTreeMap<Style, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleSpan {
    pub style: Style,
    pub start: usize,
    pub end: usize,
}

/// `L × Dt` token embedding matrix for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    utt_id: String,
    rows: usize,
    dim: usize,
    values: Vec<f64>,
    spans: Vec<StyleSpan>,
}

impl TextEmbedding {
    pub fn new(
        utt_id: impl Into<String>,
        rows: usize,
        dim: usize,
        values: Vec<f64>,
        spans: Vec<StyleSpan>,
    ) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::ShapeMismatch(format!(
                "empty embedding {rows}x{dim}"
            )));
        }
        if values.len() != rows * dim {
            return Err(Error::ShapeMismatch(format!(
                "embedding declares {rows}x{dim} but holds {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("text embedding"));
        }
        let mut cursor = 0;
        for s in &spans {
            if s.start != cursor || s.end <= s.start {
                return Err(Error::ShapeMismatch(
                    "style spans must partition the rows".into(),
                ));
            }
            cursor = s.end;
        }
        if cursor != rows {
            return Err(Error::ShapeMismatch(format!(
                "style spans cover {cursor} of {rows} rows"
            )));
        }
        Ok(Self {
            utt_id: utt_id.into(),
            rows,
            dim,
            values,
            spans,
        })
    }

    /// Single all-zero row, used to silence the text pathway.
    pub fn zero_row(utt_id: impl Into<String>, dim: usize) -> Self {
        Self {
            utt_id: utt_id.into(),
            rows: 1,
            dim,
            values: alloc::vec![0.0; dim],
            spans: alloc::vec![StyleSpan {
                style: Style::Audioset,
                start: 0,
                end: 1
            }],
        }
    }

    pub fn utt_id(&self) -> &str {
        &self.utt_id
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn spans(&self) -> &[StyleSpan] {
        &self.spans
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyEmbedderConfig {
    pub dim: usize,
    pub seed: u64,
    pub vocab_hash_buckets: u64,
}

impl Default for ToyEmbedderConfig {
    fn default() -> Self {
        Self {
            dim: 768,
            seed: 0,
            vocab_hash_buckets: 1 << 20,
        }
    }
}

/// Lowercased tokens split on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Unit vector for one token: FNV-1a hash → bucket → splitmix64 stream.
pub fn token_vector(token: &str, cfg: &ToyEmbedderConfig) -> Vec<f64> {
    let bucket = fnv1a64(token.as_bytes()) % cfg.vocab_hash_buckets.max(1);
    let mut stream = SplitMix64::new(cfg.seed ^ bucket.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut v: Vec<f64> = (0..cfg.dim).map(|_| stream.next_signed_unit()).collect();
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    for x in &mut v {
        *x /= norm;
    }
    v
}

pub fn toy_embed(c: &CaptionSet, cfg: &ToyEmbedderConfig) -> Result<TextEmbedding> {
    if cfg.dim < 8 {
        return Err(Error::InvalidConfig("toy embedder dim must be >= 8".into()));
    }
    if c.captions.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "utterance {} has no captions",
            c.utt_id
        )));
    }
    let mut values = Vec::new();
    let mut spans = Vec::new();
    let mut rows = 0;
    for (&style, text) in &c.captions {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyCaption(style.as_str()));
        }
        let start = rows;
        for tok in &tokens {
            values.extend(token_vector(tok, cfg));
        }
        rows += tokens.len();
        spans.push(StyleSpan {
            style,
            start,
            end: rows,
        });
    }
    TextEmbedding::new(c.utt_id.to_string(), rows, cfg.dim, values, spans)
}

/// Arithmetic mean of the embedding rows.
pub fn pool_text_vector(e: &TextEmbedding) -> Vec<f64> {
    let mut acc = alloc::vec![0.0; e.dim()];
    for i in 0..e.rows() {
        for (a, v) in acc.iter_mut().zip(e.row(i)) {
            *a += v;
        }
    }
    let n = e.rows() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
