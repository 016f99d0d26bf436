//! The audio-text cross-attention network: acoustic encoder, text-guided
//! cross-attention (acoustic queries, text keys/values), stacked GRU and a
//! two-way classification head.

mod net;
mod params;

pub use net::{
    cross_attention, encode_acoustic, forward, forward_on_tape, gru_stack, predict, score,
    weighted_ce, weighted_ce_batch, weighted_ce_on_tape, AcousticInput, AttentionOutput, GruOutput,
    Logits,
};
pub use params::{count_params, count_params_for, AtcaParams, GruLayer, Linear, Weights};

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dsp::FeatureMatrix;
use crate::{Error, Result};

/// Per-dimension standardisation applied to spectral features before the
/// encoder (`(x - mean) / std`). Fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for f in features {
            if sum.is_empty() {
                sum = alloc::vec![0.0; f.cols()];
                sq = alloc::vec![0.0; f.cols()];
            }
            if f.cols() != sum.len() {
                return Err(Error::ShapeMismatch(format!(
                    "feature width {} vs {}",
                    f.cols(),
                    sum.len()
                )));
            }
            for t in 0..f.rows() {
                for (d, &v) in f.row(t).iter().enumerate() {
                    sum[d] += v;
                    sq[d] += v * v;
                }
            }
            n += f.rows();
        }
        if n == 0 {
            return Err(Error::EmptySplit("train"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| libm::sqrt((s / n as f64 - m * m).max(0.0)).max(1e-3))
            .collect();
        Ok(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtcaConfig {
    /// Width of the spectral (log-mel or external) features.
    pub d_spec: usize,
    /// Width of raw-waveform patches; ignored unless `use_raw_branch`.
    pub d_raw: usize,
    pub d_model: usize,
    pub d_k: usize,
    pub n_heads: usize,
    pub gru_layers: usize,
    pub gru_hidden: usize,
    pub d_text: usize,
    pub use_raw_branch: bool,
    /// `(w_real, w_fake)` for the weighted cross-entropy.
    pub class_weights: [f64; 2],
    pub spec_norm: Option<FeatureNorm>,
}

impl Default for AtcaConfig {
    fn default() -> Self {
        Self {
            d_spec: 64,
            d_raw: 2048,
            d_model: 32,
            d_k: 8,
            n_heads: 4,
            gru_layers: 2,
            gru_hidden: 32,
            d_text: 768,
            use_raw_branch: false,
            class_weights: [1.0, 1.0],
            spec_norm: None,
        }
    }
}

impl AtcaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if [
            self.d_spec,
            self.d_model,
            self.d_k,
            self.n_heads,
            self.gru_layers,
            self.gru_hidden,
            self.d_text,
        ]
        .contains(&0)
        {
            return bad("all model dimensions must be positive");
        }
        if self.use_raw_branch && self.d_raw == 0 {
            return bad("d_raw must be positive when the raw branch is enabled");
        }
        if self.d_k * self.n_heads != self.d_model {
            return bad("d_k * n_heads must equal d_model");
        }
        if !self.class_weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
            return bad("class weights must be positive");
        }
        if let Some(norm) = &self.spec_norm {
            if norm.mean.len() != self.d_spec || norm.std.len() != self.d_spec {
                return bad("spec_norm width must equal d_spec");
            }
            if norm.std.iter().any(|s| !(*s > 0.0)) {
                return bad("spec_norm std must be positive");
            }
        }
        Ok(())
    }
}

/// Inverse class-frequency weights normalised to mean 1: `(w_real, w_fake)`.
pub fn inverse_frequency_weights(n_real: usize, n_fake: usize) -> [f64; 2] {
    if n_real == 0 || n_fake == 0 {
        return [1.0, 1.0];
    }
    let (a, b) = (1.0 / n_real as f64, 1.0 / n_fake as f64);
    let m = (a + b) / 2.0;
    [a / m, b / m]
}
