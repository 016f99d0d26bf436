//! Mini-batch training of the ATCA network and batch scoring of protocols.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::atca::{self, AcousticInput, AtcaConfig, AtcaParams, Logits};
use crate::autodiff::Tensor;
use crate::metrics::{compute_eer, Trial};
use crate::protocol::{Label, ProtocolEntry, Split};
use crate::text::TextEmbedding;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Stop after this many epochs without a validation-EER improvement.
    pub patience: usize,
    /// Global-norm gradient clipping threshold.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            patience: 10,
            grad_clip: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("epochs, batch_size and patience must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_eer: f64,
    /// Weighted cross-entropy on the dev split; breaks ties in `val_eer`.
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    /// Filled by callers that have a clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

/// One labelled training/scoring example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub utt_id: &'a str,
    pub input: &'a AcousticInput,
    pub text: &'a TextEmbedding,
    pub label: Label,
}

/// Resolve protocol entries against the feature and embedding stores.
pub fn resolve<'a>(
    entries: &[&'a ProtocolEntry],
    features: &'a BTreeMap<String, AcousticInput>,
    embeddings: &'a BTreeMap<String, TextEmbedding>,
) -> Result<Vec<Sample<'a>>> {
    entries
        .iter()
        .map(|e| {
            let input = features
                .get(&e.utt_id)
                .ok_or_else(|| Error::MissingFeature(e.utt_id.clone()))?;
            let text = embeddings
                .get(&e.utt_id)
                .ok_or_else(|| Error::MissingEmbedding(e.utt_id.clone()))?;
            Ok(Sample {
                utt_id: &e.utt_id,
                input,
                text,
                label: e.label,
            })
        })
        .collect()
}

/// Weighted-mean cross-entropy over `batch` and its gradient for every
/// parameter tensor (enumeration order). Per-sample tapes are reduced in
/// sample order.
pub fn batch_loss_and_grad(
    params: &AtcaParams,
    batch: &[Sample<'_>],
) -> Result<(f64, Vec<Tensor>)> {
    let weights = params.config.class_weights;
    let den: f64 = batch.iter().map(|s| weights[s.label.class_index()]).sum();
    let mut grads: Vec<Tensor> = params
        .weights
        .iter()
        .map(|t| Tensor::zeros(t.rows(), t.cols()))
        .collect();
    let mut loss = 0.0;
    for s in batch {
        let (mut tape, w, logits) = atca::forward(params, s.input, s.text)?;
        // unit-weight single-sample loss = -ln p_label
        let nll = atca::weighted_ce_on_tape(&mut tape, &[(logits, s.label)], [1.0, 1.0])?;
        let scale = weights[s.label.class_index()] / den;
        loss += scale * tape.value(nll).data()[0];
        let g = tape.backward(nll)?;
        for (acc, v) in grads.iter_mut().zip(w.iter()) {
            let gv = g.get(*v);
            for (a, b) in acc.data_mut().iter_mut().zip(gv.data()) {
                *a += scale * b;
            }
        }
    }
    Ok((loss, grads))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &AtcaParams, cfg: &TrainConfig) -> Self {
        let zeros = || {
            params
                .weights
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect()
        };
        Self {
            lr: cfg.lr,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn update(&mut self, params: &mut AtcaParams, grads: &[Tensor]) {
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, f64::from(self.step));
        let bc2 = 1.0 - libm::pow(self.beta2, f64::from(self.step));
        for (((p, g), m), v) in params
            .weights
            .iter_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi -= self.lr * mhat / (libm::sqrt(vhat) + self.eps);
            }
        }
    }
}

/// Rescale `grads` so that their global L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = libm::sqrt(grads.iter().map(Tensor::squared_norm).sum::<f64>());
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

fn score_samples(params: &AtcaParams, samples: &[Sample<'_>], ablate: bool) -> Result<Vec<Trial>> {
    Ok(predict_samples(params, samples, ablate)?
        .into_iter()
        .zip(samples)
        .map(|(logits, s)| Trial {
            utt_id: s.utt_id.into(),
            label: s.label,
            score: atca::score(logits),
        })
        .collect())
}

fn predict_samples(
    params: &AtcaParams,
    samples: &[Sample<'_>],
    ablate: bool,
) -> Result<Vec<Logits>> {
    let zero = TextEmbedding::zero_row("ablated", params.config.d_text);
    samples
        .iter()
        .map(|s| atca::predict(params, s.input, if ablate { &zero } else { s.text }))
        .collect()
}

/// Train on the `train` split, selecting the epoch with the lowest `dev` EER.
pub fn train(
    protocol: &[ProtocolEntry],
    features: &BTreeMap<String, AcousticInput>,
    embeddings: &BTreeMap<String, TextEmbedding>,
    cfg: &TrainConfig,
    model_cfg: &AtcaConfig,
) -> Result<(AtcaParams, TrainReport)> {
    cfg.validate()?;
    model_cfg.validate()?;
    let pick = |split| {
        protocol
            .iter()
            .filter(|e| e.split == split)
            .collect::<Vec<_>>()
    };
    let train_entries = pick(Split::Train);
    let dev_entries = pick(Split::Dev);
    if train_entries.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if dev_entries.is_empty() {
        return Err(Error::EmptySplit("dev"));
    }
    let train_set = resolve(&train_entries, features, embeddings)?;
    let dev_set = resolve(&dev_entries, features, embeddings)?;

    let mut params = AtcaParams::init(model_cfg.clone(), rng::derive_seed(cfg.seed, 1))?;
    let mut adam = Adam::new(&params, cfg);
    let mut shuffle_rng = rng::seeded(rng::derive_seed(cfg.seed, 2));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<((f64, f64), usize, AtcaParams)> = None;
    let mut history = Vec::new();
    let mut since_best = 0;

    for epoch in 0..cfg.epochs {
        rng::shuffle(&mut shuffle_rng, &mut order);
        let mut loss_num = 0.0;
        let mut loss_den = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample<'_>> = chunk.iter().map(|&i| train_set[i]).collect();
            let (loss, mut grads) = batch_loss_and_grad(&params, &batch)?;
            let w: f64 = batch
                .iter()
                .map(|s| model_cfg.class_weights[s.label.class_index()])
                .sum();
            loss_num += loss * w;
            loss_den += w;
            if let Some(c) = cfg.grad_clip {
                clip_global_norm(&mut grads, c);
            }
            adam.update(&mut params, &grads);
        }
        let logits = predict_samples(&params, &dev_set, false)?;
        let trials: Vec<Trial> = logits
            .iter()
            .zip(&dev_set)
            .map(|(l, s)| Trial {
                utt_id: s.utt_id.into(),
                label: s.label,
                score: atca::score(*l),
            })
            .collect();
        let val_eer = compute_eer(&trials)?.eer;
        let pairs: Vec<(Logits, Label)> = logits
            .into_iter()
            .zip(dev_set.iter().map(|s| s.label))
            .collect();
        let val_loss = atca::weighted_ce_batch(&pairs, model_cfg.class_weights);
        history.push(EpochStats {
            epoch,
            train_loss: loss_num / loss_den,
            val_eer,
            val_loss,
        });
        match &best {
            Some((b, _, _)) if (val_eer, val_loss) >= *b => since_best += 1,
            _ => {
                best = Some(((val_eer, val_loss), epoch, params.clone()));
                since_best = 0;
            }
        }
        if since_best >= cfg.patience {
            break;
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    Ok((
        best_params,
        TrainReport {
            epochs: history,
            best_epoch,
            wall_clock_seconds: None,
        },
    ))
}

/// Score every entry in order with the full model.
pub fn score_protocol(
    params: &AtcaParams,
    entries: &[ProtocolEntry],
    features: &BTreeMap<String, AcousticInput>,
    embeddings: &BTreeMap<String, TextEmbedding>,
) -> Result<Vec<Trial>> {
    let refs: Vec<&ProtocolEntry> = entries.iter().collect();
    score_samples(params, &resolve(&refs, features, embeddings)?, false)
}

/// Score with the text matrix replaced by a single zero row, isolating the
/// acoustic pathway.
pub fn ablate_text(
    params: &AtcaParams,
    entries: &[ProtocolEntry],
    features: &BTreeMap<String, AcousticInput>,
    embeddings: &BTreeMap<String, TextEmbedding>,
) -> Result<Vec<Trial>> {
    let refs: Vec<&ProtocolEntry> = entries.iter().collect();
    score_samples(params, &resolve(&refs, features, embeddings)?, true)
}
