use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;

use super::AtcaConfig;
use crate::autodiff::Tensor;
use crate::rng;
use crate::{Error, Result};

/// `y = x · weight + bias`, weight `in × out`, bias `1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: T,
    pub bias: T,
}

/// One GRU layer: input maps `W_*` (`in × H`), recurrent maps `U_*` (`H × H`)
/// and biases `b_*` (`1 × H`) for the update (z), reset (r) and candidate (h)
/// paths.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer<T> {
    pub w_z: T,
    pub u_z: T,
    pub b_z: T,
    pub w_r: T,
    pub u_r: T,
    pub b_r: T,
    pub w_h: T,
    pub u_h: T,
    pub b_h: T,
}

/// Every learnable array of the network. Generic so the same layout serves
/// stored tensors and their tape variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub enc_spec: Linear<T>,
    pub enc_raw: Option<Linear<T>>,
    pub wq: T,
    pub wk: T,
    pub wv: T,
    pub wo: T,
    pub gru: Vec<GruLayer<T>>,
    pub head: Linear<T>,
}

impl<T> Weights<T> {
    /// `(name, tensor)` pairs in the fixed enumeration order used by
    /// checkpoints, optimisers and gradient checks.
    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out: Vec<(String, &T)> = Vec::new();
        out.push(("enc_spec.weight".into(), &self.enc_spec.weight));
        out.push(("enc_spec.bias".into(), &self.enc_spec.bias));
        if let Some(raw) = &self.enc_raw {
            out.push(("enc_raw.weight".into(), &raw.weight));
            out.push(("enc_raw.bias".into(), &raw.bias));
        }
        out.push(("attn.wq".into(), &self.wq));
        out.push(("attn.wk".into(), &self.wk));
        out.push(("attn.wv".into(), &self.wv));
        out.push(("attn.wo".into(), &self.wo));
        for (l, g) in self.gru.iter().enumerate() {
            for (n, t) in [
                ("w_z", &g.w_z),
                ("u_z", &g.u_z),
                ("b_z", &g.b_z),
                ("w_r", &g.w_r),
                ("u_r", &g.u_r),
                ("b_r", &g.b_r),
                ("w_h", &g.w_h),
                ("u_h", &g.u_h),
                ("b_h", &g.b_h),
            ] {
                out.push((format!("gru.{l}.{n}"), t));
            }
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.named().into_iter().map(|(_, t)| t)
    }

    pub fn iter_mut(&mut self) -> Vec<&mut T> {
        let mut out: Vec<&mut T> = Vec::new();
        out.push(&mut self.enc_spec.weight);
        out.push(&mut self.enc_spec.bias);
        if let Some(raw) = &mut self.enc_raw {
            out.push(&mut raw.weight);
            out.push(&mut raw.bias);
        }
        out.push(&mut self.wq);
        out.push(&mut self.wk);
        out.push(&mut self.wv);
        out.push(&mut self.wo);
        for g in &mut self.gru {
            out.extend([
                &mut g.w_z, &mut g.u_z, &mut g.b_z, &mut g.w_r, &mut g.u_r, &mut g.b_r, &mut g.w_h,
                &mut g.u_h, &mut g.b_h,
            ]);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    /// Map every tensor in enumeration order.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Weights<U> {
        let lin = |l: &Linear<T>, f: &mut dyn FnMut(&T) -> U| Linear {
            weight: f(&l.weight),
            bias: f(&l.bias),
        };
        let enc_spec = lin(&self.enc_spec, &mut f);
        let enc_raw = self.enc_raw.as_ref().map(|l| lin(l, &mut f));
        let wq = f(&self.wq);
        let wk = f(&self.wk);
        let wv = f(&self.wv);
        let wo = f(&self.wo);
        let gru = self
            .gru
            .iter()
            .map(|g| GruLayer {
                w_z: f(&g.w_z),
                u_z: f(&g.u_z),
                b_z: f(&g.b_z),
                w_r: f(&g.w_r),
                u_r: f(&g.u_r),
                b_r: f(&g.b_r),
                w_h: f(&g.w_h),
                u_h: f(&g.u_h),
                b_h: f(&g.b_h),
            })
            .collect();
        let head = lin(&self.head, &mut f);
        Weights {
            enc_spec,
            enc_raw,
            wq,
            wk,
            wv,
            wo,
            gru,
            head,
        }
    }
}

/// Shapes `(rows, cols)` for every tensor of `cfg`, in enumeration order.
fn layout(cfg: &AtcaConfig) -> Weights<(usize, usize)> {
    let (dm, h) = (cfg.d_model, cfg.gru_hidden);
    let lin = |i: usize, o: usize| Linear {
        weight: (i, o),
        bias: (1, o),
    };
    let gru = (0..cfg.gru_layers)
        .map(|l| {
            let input = if l == 0 { dm } else { h };
            GruLayer {
                w_z: (input, h),
                u_z: (h, h),
                b_z: (1, h),
                w_r: (input, h),
                u_r: (h, h),
                b_r: (1, h),
                w_h: (input, h),
                u_h: (h, h),
                b_h: (1, h),
            }
        })
        .collect();
    Weights {
        enc_spec: lin(cfg.d_spec, dm),
        enc_raw: cfg.use_raw_branch.then(|| lin(cfg.d_raw, dm)),
        wq: (dm, dm),
        wk: (cfg.d_text, dm),
        wv: (cfg.d_text, dm),
        wo: (dm, dm),
        gru,
        head: lin(h, 2),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtcaParams {
    pub config: AtcaConfig,
    pub weights: Weights<Tensor>,
}

impl AtcaParams {
    /// Glorot-uniform matrices `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`,
    /// zero biases.
    pub fn init(config: AtcaConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(seed);
        let shapes = layout(&config);
        let weights = shapes.map(|&(r, c)| {
            if r == 1 {
                return Tensor::zeros(r, c);
            }
            let a = libm::sqrt(6.0 / (r + c) as f64);
            let data = (0..r * c).map(|_| rng.gen_range(-a..a)).collect();
            Tensor::from_parts(r, c, data)
        });
        Ok(Self { config, weights })
    }

    /// All-zero parameters for `config`.
    pub fn zeros(config: AtcaConfig) -> Result<Self> {
        config.validate()?;
        let weights = layout(&config).map(|&(r, c)| Tensor::zeros(r, c));
        Ok(Self { config, weights })
    }

    /// Rebuild from `(name, tensor)` pairs in enumeration order, checking
    /// names and shapes against the config.
    pub fn from_named(config: AtcaConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let expected: Vec<(String, [usize; 2])> = p
            .weights
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.shape()))
            .collect();
        if expected.len() != tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&tensors) {
            if name != got_name || *shape != t.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {got_name} {:?} where {name} {:?} expected",
                    t.shape(),
                    shape
                )));
            }
        }
        for (slot, (_, t)) in p.weights.iter_mut().into_iter().zip(tensors) {
            *slot = t;
        }
        Ok(p)
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.weights.named()
    }
}

/// Total number of scalar parameters.
pub fn count_params(p: &AtcaParams) -> u64 {
    p.weights.iter().map(|t| t.len() as u64).sum()
}

/// Same count computed from the config alone (no allocation).
pub fn count_params_for(cfg: &AtcaConfig) -> u64 {
    layout(cfg).iter().map(|&(r, c)| r as u64 * c as u64).sum()
}
