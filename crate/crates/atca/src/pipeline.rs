//! File-level pipeline steps shared by the CLI and the tests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use atca_core::atca::{
    inverse_frequency_weights, AcousticInput, AtcaConfig, AtcaParams, FeatureNorm,
};
use atca_core::baseline::LinearBaseline;
use atca_core::dsp::{rawpatch, stft_logmel, FeatureMatrix, Origin};
use atca_core::ensemble::{
    build_meta_examples, fit_stacked, predict_stacked, StackedConfig, StackedFit, StackedModel,
};
use atca_core::metrics::{compute_eer, merge_with_protocol, EerResult, Trial};
use atca_core::protocol::{Label, ProtocolEntry, Split};
use atca_core::rng;
use atca_core::text::{toy_embed, TextEmbedding, ToyEmbedderConfig};
use atca_core::train::{self, TrainReport};

use crate::config::{FeatureConfig, RunConfig};
use crate::error::{Error, Result};
use crate::{atfx, captions, corpus, embeddings, fsutil, tsv, wav};

pub const LOGMEL_DIR: &str = "logmel";
pub const RAWPATCH_DIR: &str = "rawpatch";

/// Which protocol rows a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSel {
    All,
    Only(Split),
}

impl SplitSel {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "all" {
            Some(Self::All)
        } else {
            Split::parse(s).map(Self::Only)
        }
    }

    pub fn keep(self, e: &ProtocolEntry) -> bool {
        match self {
            Self::All => true,
            Self::Only(s) => e.split == s,
        }
    }

    pub fn as_split(self) -> Option<Split> {
        match self {
            Self::All => None,
            Self::Only(s) => Some(s),
        }
    }
}

pub fn select(entries: &[ProtocolEntry], sel: SplitSel) -> Vec<ProtocolEntry> {
    entries.iter().filter(|e| sel.keep(e)).cloned().collect()
}

fn feature_file(dir: &Path, kind: &str, utt_id: &str) -> PathBuf {
    dir.join(kind).join(format!("{utt_id}.atfx"))
}

/// Log-mel (and optionally raw-patch) feature files for every clip listed in
/// the corpus manifest.
pub fn featurize(corpus_dir: &Path, out: &Path, cfg: &FeatureConfig, force: bool) -> Result<usize> {
    let manifest = corpus::load_manifest(corpus_dir)?;
    for name in [LOGMEL_DIR, RAWPATCH_DIR, "features_config.json"] {
        fsutil::claim(&out.join(name), force)?;
    }
    fsutil::create_dir(&out.join(LOGMEL_DIR))?;
    if cfg.raw_patch.is_some() {
        fsutil::create_dir(&out.join(RAWPATCH_DIR))?;
    }
    for clip in &manifest.clips {
        let w = wav::load_wav(&corpus_dir.join(atca_core::synth::wav_path(&clip.utt_id)))?;
        let spec = stft_logmel(&w, &cfg.stft)?;
        atfx::write_features(&feature_file(out, LOGMEL_DIR, &clip.utt_id), &spec)?;
        if let Some(r) = cfg.raw_patch {
            let raw = rawpatch(&w, r.patch, r.stride)?;
            atfx::write_features(&feature_file(out, RAWPATCH_DIR, &clip.utt_id), &raw)?;
        }
    }
    fsutil::write_json(&out.join("features_config.json"), cfg)?;
    Ok(manifest.clips.len())
}

/// Load features for `ids`; raw patches only when `with_raw`.
pub fn load_features<'a>(
    dir: &Path,
    ids: impl IntoIterator<Item = &'a str>,
    with_raw: bool,
) -> Result<BTreeMap<String, AcousticInput>> {
    let mut out = BTreeMap::new();
    for id in ids {
        let path = feature_file(dir, LOGMEL_DIR, id);
        if !path.exists() {
            return Err(atca_core::Error::MissingFeature(id.to_string()).into());
        }
        let spec = atfx::load_external_features(&path)?;
        let raw = if with_raw {
            let p = feature_file(dir, RAWPATCH_DIR, id);
            if !p.exists() {
                return Err(atca_core::Error::MissingFeature(format!("{id} (raw patches)")).into());
            }
            Some(atfx::load_external_features(&p)?.with_origin(Origin::Rawpatch))
        } else {
            None
        };
        out.insert(id.to_string(), AcousticInput { spec, raw });
    }
    Ok(out)
}

pub fn embed(corpus_dir: &Path, out: &Path, cfg: &ToyEmbedderConfig, force: bool) -> Result<usize> {
    let sets = captions::load_captions(&corpus_dir.join(corpus::CAPTIONS))?;
    let embs = sets
        .iter()
        .map(|c| toy_embed(c, cfg))
        .collect::<atca_core::Result<Vec<_>>>()?;
    write_embeddings(out, &embs, force)?;
    fsutil::write_json(&out.join("embedder_config.json"), cfg)?;
    Ok(embs.len())
}

fn write_embeddings(out: &Path, embs: &[TextEmbedding], force: bool) -> Result<()> {
    let (p, i) = embeddings::paths(out);
    fsutil::claim(&p, force)?;
    fsutil::claim(&i, force)?;
    fsutil::claim(&out.join("embedder_config.json"), force)?;
    fsutil::create_dir(out)?;
    embeddings::write_store(out, embs)
}

/// Validate an externally produced embedding store and rewrite it in
/// canonical form.
pub fn embed_import(payload: &Path, index: &Path, out: &Path, force: bool) -> Result<usize> {
    let bytes = std::fs::read(payload).map_err(Error::io(payload))?;
    let text = std::fs::read_to_string(index).map_err(Error::io(index))?;
    let embs = embeddings::decode_store(&bytes, &text, payload, index)?;
    write_embeddings(out, &embs, force)?;
    Ok(embs.len())
}

/// Keep a seeded `fraction` of the train split (at least one row); other
/// splits are untouched.
pub fn subset_train(
    entries: &[ProtocolEntry],
    fraction: f64,
    seed: u64,
) -> Result<Vec<ProtocolEntry>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Usage(format!(
            "--fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut train: Vec<usize> = (0..entries.len())
        .filter(|&i| entries[i].split == Split::Train)
        .collect();
    rng::shuffle(&mut rng::seeded(rng::derive_seed(seed, 3)), &mut train);
    let keep =
        ((fraction * train.len() as f64).round() as usize).clamp(1.min(train.len()), train.len());
    let kept: BTreeSet<usize> = train[..keep].iter().copied().collect();
    Ok(entries
        .iter()
        .enumerate()
        .filter(|(i, e)| e.split != Split::Train || kept.contains(i))
        .map(|(_, e)| e.clone())
        .collect())
}

/// Resolve data-dependent model settings: widths from the data, class
/// weights and spectral normalisation from the train split.
pub fn resolve_model_config(
    base: &AtcaConfig,
    auto_class_weights: bool,
    protocol: &[ProtocolEntry],
    features: &BTreeMap<String, AcousticInput>,
    embeddings: &BTreeMap<String, TextEmbedding>,
) -> Result<AtcaConfig> {
    let mut cfg = base.clone();
    let train: Vec<&ProtocolEntry> = protocol
        .iter()
        .filter(|e| e.split == Split::Train)
        .collect();
    let first = train.first().ok_or(atca_core::Error::EmptySplit("train"))?;
    let input = features
        .get(&first.utt_id)
        .ok_or_else(|| atca_core::Error::MissingFeature(first.utt_id.clone()))?;
    cfg.d_spec = input.spec.cols();
    if let Some(raw) = &input.raw {
        cfg.d_raw = raw.cols();
    }
    if let Some(e) = embeddings.values().next() {
        cfg.d_text = e.dim();
    }
    if auto_class_weights {
        let n_real = train.iter().filter(|e| e.label == Label::Bonafide).count();
        cfg.class_weights = inverse_frequency_weights(n_real, train.len() - n_real);
    }
    if cfg.spec_norm.is_none() {
        let mats: Vec<&FeatureMatrix> = train
            .iter()
            .filter_map(|e| features.get(&e.utt_id))
            .map(|i| &i.spec)
            .collect();
        cfg.spec_norm = Some(FeatureNorm::fit(mats)?);
    }
    Ok(cfg)
}

pub struct TrainData {
    pub protocol: Vec<ProtocolEntry>,
    pub features: BTreeMap<String, AcousticInput>,
    pub embeddings: BTreeMap<String, TextEmbedding>,
}

impl TrainData {
    pub fn load(
        protocol: Vec<ProtocolEntry>,
        features_dir: &Path,
        embeddings_dir: &Path,
        with_raw: bool,
    ) -> Result<Self> {
        let features = load_features(
            features_dir,
            protocol.iter().map(|e| e.utt_id.as_str()),
            with_raw,
        )?;
        let embeddings = embeddings::load_map(embeddings_dir)?;
        Ok(Self {
            protocol,
            features,
            embeddings,
        })
    }
}

pub fn train_model(data: &TrainData, cfg: &RunConfig) -> Result<(AtcaParams, TrainReport)> {
    let model = resolve_model_config(
        &cfg.model,
        cfg.auto_class_weights,
        &data.protocol,
        &data.features,
        &data.embeddings,
    )?;
    Ok(train::train(
        &data.protocol,
        &data.features,
        &data.embeddings,
        &cfg.train,
        &model,
    )?)
}

pub fn score_model(
    params: &AtcaParams,
    data: &TrainData,
    sel: SplitSel,
    ablate: bool,
) -> Result<Vec<Trial>> {
    let entries = select(&data.protocol, sel);
    let f = if ablate {
        train::ablate_text
    } else {
        train::score_protocol
    };
    Ok(f(params, &entries, &data.features, &data.embeddings)?)
}

pub fn eer_for(
    scores: &[(String, f64)],
    protocol: &[ProtocolEntry],
    split: Option<Split>,
) -> Result<EerResult> {
    let trials = merge_with_protocol(scores, protocol, split)?;
    Ok(compute_eer(&trials)?)
}

pub fn fit_baseline(data: &TrainData, lambda: f64) -> Result<LinearBaseline> {
    let train = data.protocol.iter().filter(|e| e.split == Split::Train);
    let pairs = train
        .map(|e| {
            data.features
                .get(&e.utt_id)
                .map(|f| (&f.spec, e.label))
                .ok_or_else(|| atca_core::Error::MissingFeature(e.utt_id.clone()))
        })
        .collect::<atca_core::Result<Vec<_>>>()?;
    Ok(LinearBaseline::fit(pairs, lambda)?)
}

pub fn score_baseline(
    model: &LinearBaseline,
    data: &TrainData,
    sel: SplitSel,
) -> Result<Vec<Trial>> {
    select(&data.protocol, sel)
        .into_iter()
        .map(|e| {
            let f = data
                .features
                .get(&e.utt_id)
                .ok_or_else(|| atca_core::Error::MissingFeature(e.utt_id.clone()))?;
            Ok(Trial {
                score: model.score(&f.spec)?,
                utt_id: e.utt_id,
                label: e.label,
            })
        })
        .collect()
}

/// Restrict each score set to the protocol rows of `split`.
fn restrict(
    score_sets: &[Vec<(String, f64)>],
    protocol: &[ProtocolEntry],
    sel: SplitSel,
) -> (Vec<Vec<(String, f64)>>, Vec<ProtocolEntry>) {
    let entries = select(protocol, sel);
    let ids: BTreeSet<&str> = entries.iter().map(|e| e.utt_id.as_str()).collect();
    let sets = score_sets
        .iter()
        .map(|s| {
            s.iter()
                .filter(|(id, _)| ids.contains(id.as_str()))
                .cloned()
                .collect()
        })
        .collect();
    (sets, entries)
}

pub fn fit_ensemble(
    score_sets: &[Vec<(String, f64)>],
    embeddings: &BTreeMap<String, TextEmbedding>,
    protocol: &[ProtocolEntry],
    sel: SplitSel,
    cfg: &StackedConfig,
) -> Result<StackedFit> {
    let (sets, entries) = restrict(score_sets, protocol, sel);
    let examples = build_meta_examples(&sets, embeddings, &entries)?;
    Ok(fit_stacked(&examples, cfg)?)
}

pub fn score_ensemble(
    model: &StackedModel,
    score_sets: &[Vec<(String, f64)>],
    embeddings: &BTreeMap<String, TextEmbedding>,
    protocol: &[ProtocolEntry],
    sel: SplitSel,
) -> Result<Vec<Trial>> {
    let (sets, entries) = restrict(score_sets, protocol, sel);
    build_meta_examples(&sets, embeddings, &entries)?
        .into_iter()
        .zip(&entries)
        .map(|(m, e)| {
            debug_assert_eq!(m.utt_id, e.utt_id);
            Ok(Trial {
                score: predict_stacked(model, &m.features())?,
                utt_id: m.utt_id,
                label: e.label,
            })
        })
        .collect()
}

pub fn write_trials(path: &Path, trials: &[Trial], force: bool) -> Result<()> {
    fsutil::claim(path, force)?;
    tsv::write_scores(path, trials)
}
