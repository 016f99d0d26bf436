//! JSON run configuration. Every section is optional; unknown keys are
//! rejected.

use std::fs;
use std::path::Path;

use atca_core::atca::AtcaConfig;
use atca_core::dsp::StftConfig;
use atca_core::ensemble::StackedConfig;
use atca_core::synth::CorpusConfig;
use atca_core::text::ToyEmbedderConfig;
use atca_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPatchConfig {
    pub patch: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    /// Raw-waveform patches are only extracted when set.
    pub raw_patch: Option<RawPatchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub features: FeatureConfig,
    pub embedder: ToyEmbedderConfig,
    /// `d_spec`, `d_raw` and `d_text` are overwritten from the data at train
    /// time, and `spec_norm` is fitted on the train split when absent.
    pub model: AtcaConfig,
    pub train: TrainConfig,
    /// Replace `model.class_weights` by inverse class frequencies of the
    /// train split.
    pub auto_class_weights: bool,
    pub ensemble: StackedConfig,
    pub baseline_lambda: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusConfig::default(),
            features: FeatureConfig::default(),
            embedder: ToyEmbedderConfig::default(),
            model: AtcaConfig::default(),
            train: TrainConfig::default(),
            auto_class_weights: true,
            ensemble: StackedConfig::default(),
            baseline_lambda: 1.0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::BadJson {
            path: path.into(),
            line: e.line(),
            why: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_json(&text, path)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
