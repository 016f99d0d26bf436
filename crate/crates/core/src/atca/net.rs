use alloc::format;
use alloc::vec::Vec;

use super::{AtcaConfig, AtcaParams, Weights};
use crate::autodiff::{Tape, Tensor, Var};
use crate::dsp::{FeatureMatrix, Origin};
use crate::protocol::Label;
use crate::text::TextEmbedding;
use crate::{Error, Result};

/// Acoustic inputs for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticInput {
    pub spec: FeatureMatrix,
    pub raw: Option<FeatureMatrix>,
}

/// Pre-softmax class scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logits {
    pub real: f64,
    pub fake: f64,
}

/// Detection score: `logit_real - logit_fake` (higher means more likely genuine).
pub fn score(l: Logits) -> f64 {
    l.real - l.fake
}

fn feature_tensor(f: &FeatureMatrix) -> Tensor {
    Tensor::from_parts(f.rows(), f.cols(), f.values().to_vec())
}

fn normalized_spec(spec: &FeatureMatrix, cfg: &AtcaConfig) -> Tensor {
    let mut t = feature_tensor(spec);
    if let Some(norm) = &cfg.spec_norm {
        let cols = t.cols();
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            let d = i % cols;
            *v = (*v - norm.mean[d]) / norm.std[d];
        }
    }
    t
}

fn linear(tape: &mut Tape, x: Var, w: &super::Linear<Var>) -> Result<Var> {
    let xw = tape.matmul(x, w.weight)?;
    tape.add_row(xw, w.bias)
}

/// Project each branch to `d_model`, apply tanh and stack along time
/// (spectral frames first, then raw frames).
pub fn encode_acoustic(
    tape: &mut Tape,
    input: &AcousticInput,
    w: &Weights<Var>,
    cfg: &AtcaConfig,
) -> Result<Var> {
    let spec = &input.spec;
    if spec.origin() == Origin::Rawpatch {
        return Err(Error::ShapeMismatch(
            "spectral branch given raw patches".into(),
        ));
    }
    if spec.cols() != cfg.d_spec {
        return Err(Error::ShapeMismatch(format!(
            "spectral width {} vs d_spec {}",
            spec.cols(),
            cfg.d_spec
        )));
    }
    let x = tape.constant(normalized_spec(spec, cfg));
    let pre = linear(tape, x, &w.enc_spec)?;
    let spec_enc = tape.tanh(pre)?;
    match (&input.raw, &w.enc_raw) {
        (None, None) => Ok(spec_enc),
        (Some(raw), Some(enc)) => {
            if raw.cols() != cfg.d_raw {
                return Err(Error::ShapeMismatch(format!(
                    "raw width {} vs d_raw {}",
                    raw.cols(),
                    cfg.d_raw
                )));
            }
            let r = tape.constant(feature_tensor(raw));
            let pre = linear(tape, r, enc)?;
            let raw_enc = tape.tanh(pre)?;
            tape.concat_rows(&[spec_enc, raw_enc])
        }
        (Some(_), None) => Err(Error::ShapeMismatch(
            "raw features given but raw branch disabled".into(),
        )),
        (None, Some(_)) => Err(Error::ShapeMismatch(
            "raw branch enabled but no raw features".into(),
        )),
    }
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// `acoustic + attended`, `T × d_model`.
    pub output: Var,
    /// Attended values after the output projection, before the residual.
    pub attended: Var,
    /// One `T × L` row-stochastic weight matrix per head.
    pub weights: Vec<Var>,
}

/// Multi-head scaled dot-product attention with acoustic queries and text
/// keys/values, followed by the output projection and a residual add.
pub fn cross_attention(
    tape: &mut Tape,
    acoustic: Var,
    text: Var,
    w: &Weights<Var>,
    cfg: &AtcaConfig,
) -> Result<AttentionOutput> {
    if tape.value(text).cols() != cfg.d_text {
        return Err(Error::ShapeMismatch(format!(
            "text width {} vs d_text {}",
            tape.value(text).cols(),
            cfg.d_text
        )));
    }
    let q = tape.matmul(acoustic, w.wq)?;
    let k = tape.matmul(text, w.wk)?;
    let v = tape.matmul(text, w.wv)?;
    let inv_sqrt_dk = 1.0 / libm::sqrt(cfg.d_k as f64);
    let mut heads = Vec::with_capacity(cfg.n_heads);
    let mut weights = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let (a, b) = (h * cfg.d_k, (h + 1) * cfg.d_k);
        let qh = tape.slice_cols(q, a, b)?;
        let kh = tape.slice_cols(k, a, b)?;
        let vh = tape.slice_cols(v, a, b)?;
        let kt = tape.transpose(kh)?;
        let logits = tape.matmul(qh, kt)?;
        let scaled = tape.scale(logits, inv_sqrt_dk)?;
        let attn = tape.softmax_rows(scaled)?;
        heads.push(tape.matmul(attn, vh)?);
        weights.push(attn);
    }
    let merged = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)?
    };
    let attended = tape.matmul(merged, w.wo)?;
    let output = tape.add(acoustic, attended)?;
    Ok(AttentionOutput {
        output,
        attended,
        weights,
    })
}

#[derive(Debug, Clone)]
pub struct GruOutput {
    /// Final hidden state of the last layer, `1 × H`.
    pub last: Var,
    /// Hidden sequence of the last layer, `T × H`.
    pub sequence: Var,
}

/// Stacked GRU, `h_t = z ∘ h_{t-1} + (1 - z) ∘ h̃`. Each layer starts from
/// `initial` (zeros when `None`) and feeds its hidden sequence to the next.
pub fn gru_stack(
    tape: &mut Tape,
    x: Var,
    w: &Weights<Var>,
    cfg: &AtcaConfig,
    initial: Option<&Tensor>,
) -> Result<GruOutput> {
    let hidden = cfg.gru_hidden;
    let h0 = match initial {
        Some(t) if t.shape() != [1, hidden] => {
            return Err(Error::ShapeMismatch(format!(
                "initial state {:?} vs 1x{hidden}",
                t.shape()
            )))
        }
        Some(t) => t.clone(),
        None => Tensor::zeros(1, hidden),
    };
    let mut input = x;
    let mut last = None;
    for layer in &w.gru {
        // input projections for all steps at once
        let xz = tape.matmul(input, layer.w_z)?;
        let xz = tape.add_row(xz, layer.b_z)?;
        let xr = tape.matmul(input, layer.w_r)?;
        let xr = tape.add_row(xr, layer.b_r)?;
        let xh = tape.matmul(input, layer.w_h)?;
        let xh = tape.add_row(xh, layer.b_h)?;
        let steps = tape.value(input).rows();
        let mut h = tape.constant(h0.clone());
        let mut states = Vec::with_capacity(steps);
        for t in 0..steps {
            let xz_t = tape.slice_rows(xz, t, t + 1)?;
            let hz = tape.matmul(h, layer.u_z)?;
            let z_pre = tape.add(xz_t, hz)?;
            let z = tape.sigmoid(z_pre)?;

            let xr_t = tape.slice_rows(xr, t, t + 1)?;
            let hr = tape.matmul(h, layer.u_r)?;
            let r_pre = tape.add(xr_t, hr)?;
            let r = tape.sigmoid(r_pre)?;

            let xh_t = tape.slice_rows(xh, t, t + 1)?;
            let rh = tape.mul(r, h)?;
            let rhu = tape.matmul(rh, layer.u_h)?;
            let c_pre = tape.add(xh_t, rhu)?;
            let cand = tape.tanh(c_pre)?;

            let keep = tape.mul(z, h)?;
            let one_minus_z = tape.affine(z, -1.0, 1.0)?;
            let update = tape.mul(one_minus_z, cand)?;
            h = tape.add(keep, update)?;
            states.push(h);
        }
        input = tape.concat_rows(&states)?;
        last = Some(h);
    }
    let last = last.ok_or_else(|| Error::InvalidConfig("no GRU layers".into()))?;
    Ok(GruOutput {
        last,
        sequence: input,
    })
}

/// Full network on a tape; returns the `1 × 2` logits variable.
pub fn forward_on_tape(
    tape: &mut Tape,
    input: &AcousticInput,
    text: &TextEmbedding,
    w: &Weights<Var>,
    cfg: &AtcaConfig,
) -> Result<Var> {
    let acoustic = encode_acoustic(tape, input, w, cfg)?;
    let text_var = tape.constant(Tensor::from_parts(
        text.rows(),
        text.dim(),
        text.values().to_vec(),
    ));
    let fused = cross_attention(tape, acoustic, text_var, w, cfg)?;
    let gru = gru_stack(tape, fused.output, w, cfg, None)?;
    let hw = tape.matmul(gru.last, w.head.weight)?;
    tape.add_row(hw, w.head.bias)
}

fn logits_of(tape: &Tape, v: Var) -> Logits {
    let d = tape.value(v).data();
    Logits {
        real: d[0],
        fake: d[1],
    }
}

/// Forward pass with parameters bound as trainable leaves; returns the tape,
/// the bound parameters and the logits variable.
pub fn forward(
    params: &AtcaParams,
    input: &AcousticInput,
    text: &TextEmbedding,
) -> Result<(Tape, Weights<Var>, Var)> {
    let mut tape = Tape::new();
    let w = params.weights.map(|t| tape.param(t.clone()));
    let logits = forward_on_tape(&mut tape, input, text, &w, &params.config)?;
    Ok((tape, w, logits))
}

/// Inference-only forward pass.
pub fn predict(params: &AtcaParams, input: &AcousticInput, text: &TextEmbedding) -> Result<Logits> {
    let mut tape = Tape::new();
    let w = params.weights.map(|t| tape.constant(t.clone()));
    let v = forward_on_tape(&mut tape, input, text, &w, &params.config)?;
    Ok(logits_of(&tape, v))
}

/// Per-sample weighted cross-entropy numerator `-w_label · ln p_label`.
pub fn weighted_ce(logits: Logits, label: Label, weights: [f64; 2]) -> f64 {
    let max = logits.real.max(logits.fake);
    let lse = max + libm::log(libm::exp(logits.real - max) + libm::exp(logits.fake - max));
    let chosen = match label {
        Label::Bonafide => logits.real,
        Label::Spoof => logits.fake,
    };
    weights[label.class_index()] * (lse - chosen)
}

/// Weighted mean over a batch: `Σ w_i·(-ln p_i) / Σ w_i`.
pub fn weighted_ce_batch(batch: &[(Logits, Label)], weights: [f64; 2]) -> f64 {
    let num: f64 = batch.iter().map(|&(l, y)| weighted_ce(l, y, weights)).sum();
    let den: f64 = batch.iter().map(|&(_, y)| weights[y.class_index()]).sum();
    num / den
}

/// Tape version of [`weighted_ce_batch`] over `1 × 2` logit variables.
pub fn weighted_ce_on_tape(
    tape: &mut Tape,
    batch: &[(Var, Label)],
    weights: [f64; 2],
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::EmptySplit("batch"));
    }
    let den: f64 = batch.iter().map(|&(_, y)| weights[y.class_index()]).sum();
    let mut total: Option<Var> = None;
    for &(logits, label) in batch {
        let ls = tape.log_softmax_rows(logits)?;
        let mut mask = [0.0; 2];
        mask[label.class_index()] = -weights[label.class_index()] / den;
        let m = tape.constant(Tensor::from_parts(1, 2, mask.to_vec()));
        let picked = tape.mul(ls, m)?;
        let s = tape.sum_all(picked)?;
        total = Some(match total {
            None => s,
            Some(acc) => tape.add(acc, s)?,
        });
    }
    Ok(total.expect("non-empty batch"))
}
