use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{cholesky_solve, mean};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl Ridge {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// `Σ(y - Xw - b)² + λ‖w‖²`
    pub fn objective(&self, xs: &[Vec<f64>], y: &[f64]) -> f64 {
        let sse: f64 = xs
            .iter()
            .zip(y)
            .map(|(x, t)| {
                let r = t - self.predict(x);
                r * r
            })
            .sum();
        sse + self.lambda * self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Closed-form ridge regression with an unpenalised intercept, solved through
/// the normal equations of the centred data.
pub fn fit_ridge(xs: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<Ridge> {
    if xs.is_empty() || xs.len() != y.len() {
        return Err(Error::TooFewExamples {
            needed: 1,
            got: xs.len().min(y.len()),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig("lambda must be non-negative".into()));
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(Error::DimMismatch {
            expected: d,
            got: xs.iter().map(Vec::len).find(|&l| l != d).unwrap_or(d),
        });
    }
    let n = xs.len() as f64;
    let y_mean = mean(y);
    let mut x_mean = vec![0.0; d];
    for x in xs {
        for (m, v) in x_mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    if d == 0 {
        return Ok(Ridge {
            weights: Vec::new(),
            intercept: y_mean,
            lambda,
        });
    }
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centred = vec![0.0; d];
    for (x, &t) in xs.iter().zip(y) {
        for (c, (v, m)) in centred.iter_mut().zip(x.iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = t - y_mean;
        for i in 0..d {
            let ci = centred[i];
            if ci == 0.0 {
                continue;
            }
            rhs[i] += ci * yc;
            let row = &mut gram[i * d..(i + 1) * d];
            for (g, cj) in row[i..].iter_mut().zip(&centred[i..]) {
                *g += ci * cj;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i * d + j] = gram[j * d + i];
        }
        gram[i * d + i] += lambda;
    }
    let weights = cholesky_solve(&gram, &rhs, d)?;
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(Ridge {
        weights,
        intercept,
        lambda,
    })
}
