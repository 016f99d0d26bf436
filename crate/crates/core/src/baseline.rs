//! Log-mel-only linear baseline: per-utterance mean and standard deviation of
//! each log-mel band, standardised, regressed onto the bonafide indicator.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dsp::FeatureMatrix;
use crate::ensemble::{fit_ridge, Ridge};
use crate::protocol::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub ridge: Ridge,
}

pub fn pooled_stats(f: &FeatureMatrix) -> Vec<f64> {
    let (t, d) = (f.rows() as f64, f.cols());
    let mut out = alloc::vec![0.0; 2 * d];
    for r in 0..f.rows() {
        for (c, v) in f.row(r).iter().enumerate() {
            out[c] += v / t;
        }
    }
    for r in 0..f.rows() {
        for (c, v) in f.row(r).iter().enumerate() {
            {
                let dv = v - out[c];
                out[d + c] += dv * dv / t;
            }
        }
    }
    for v in &mut out[d..] {
        *v = libm::sqrt(*v);
    }
    out
}

impl LinearBaseline {
    pub fn fit<'a>(
        data: impl IntoIterator<Item = (&'a FeatureMatrix, Label)>,
        lambda: f64,
    ) -> Result<Self> {
        let (xs, y): (Vec<Vec<f64>>, Vec<f64>) = data
            .into_iter()
            .map(|(f, l)| (pooled_stats(f), l.target()))
            .unzip();
        if xs.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        let d = xs[0].len();
        if let Some(x) = xs.iter().find(|x| x.len() != d) {
            return Err(Error::DimMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let n = xs.len() as f64;
        let mut mean = alloc::vec![0.0; d];
        let mut std = alloc::vec![0.0; d];
        for x in &xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        for x in &xs {
            for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        std.iter_mut().for_each(|s| *s = libm::sqrt(*s).max(1e-6));
        let z: Vec<Vec<f64>> = xs.iter().map(|x| standardise(x, &mean, &std)).collect();
        let ridge = fit_ridge(&z, &y, lambda)?;
        Ok(Self { mean, std, ridge })
    }

    pub fn score(&self, f: &FeatureMatrix) -> Result<f64> {
        let x = pooled_stats(f);
        if x.len() != self.mean.len() {
            return Err(Error::DimMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(self.ridge.predict(&standardise(&x, &self.mean, &self.std)))
    }
}

fn standardise(x: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(mean)
        .zip(std)
        .map(|((v, m), s)| (v - m) / s)
        .collect()
}
