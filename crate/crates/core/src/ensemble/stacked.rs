use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::forest::{fit_forest, Forest, ForestConfig};
use super::gbm::{fit_gbm, Gbm};
use super::meta::MetaExample;
use super::ridge::{fit_ridge, Ridge};
use crate::rng::{derive_seed, seeded, shuffle};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackedConfig {
    pub gbm_rounds: usize,
    pub gbm_depth: usize,
    pub gbm_shrinkage: f64,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub forest_feature_frac: f64,
    pub ridge_lambda: f64,
    pub folds: usize,
    /// Simplex grid resolution for the blend weights.
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for StackedConfig {
    fn default() -> Self {
        Self {
            gbm_rounds: 100,
            gbm_depth: 3,
            gbm_shrinkage: 0.1,
            forest_trees: 100,
            forest_max_depth: 6,
            forest_feature_frac: 1.0 / 3.0,
            ridge_lambda: 1.0,
            folds: 5,
            grid_step: 0.05,
            seed: 0,
        }
    }
}

impl StackedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be at least 2".into()));
        }
        if !(self.gbm_shrinkage > 0.0 && self.gbm_shrinkage <= 1.0) {
            return Err(Error::InvalidConfig(
                "gbm_shrinkage must lie in (0, 1]".into(),
            ));
        }
        if !(self.forest_feature_frac > 0.0 && self.forest_feature_frac <= 1.0) {
            return Err(Error::InvalidConfig(
                "forest_feature_frac must lie in (0, 1]".into(),
            ));
        }
        if self.forest_trees == 0 {
            return Err(Error::InvalidConfig("forest_trees must be positive".into()));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::InvalidConfig(
                "ridge_lambda must be non-negative".into(),
            ));
        }
        let steps = 1.0 / self.grid_step;
        if !(self.grid_step > 0.0 && (steps - libm::round(steps)).abs() < 1e-9) {
            return Err(Error::InvalidConfig("grid_step must divide 1".into()));
        }
        Ok(())
    }

    fn forest(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.forest_trees,
            max_depth: self.forest_max_depth,
            feature_frac: self.forest_feature_frac,
            bootstrap: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub n_features: usize,
    pub gbm: Gbm,
    pub forest: Forest,
    pub ridge: Ridge,
    /// `[gbm, forest, ridge]`, on the simplex.
    pub combine_weights: [f64; 3],
}

impl StackedModel {
    pub fn components(&self, x: &[f64]) -> [f64; 3] {
        [
            self.gbm.predict(x),
            self.forest.predict(x),
            self.ridge.predict(x),
        ]
    }
}

/// Training indices and held-out indices for one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StackedFit {
    pub model: StackedModel,
    pub folds: Vec<FoldRecord>,
    /// Out-of-fold predictions, `[gbm, forest, ridge]` per example.
    pub oof: Vec<[f64; 3]>,
    pub oof_mse: f64,
}

pub fn predict_stacked(m: &StackedModel, x: &[f64]) -> Result<f64> {
    if x.len() != m.n_features {
        return Err(Error::DimMismatch {
            expected: m.n_features,
            got: x.len(),
        });
    }
    let c = m.components(x);
    Ok(m.combine_weights.iter().zip(c).map(|(w, p)| w * p).sum())
}

/// Simplex points `(i, j, k) * step` with `i + j + k = 1/step`.
pub fn simplex_grid(step: f64) -> Vec<[f64; 3]> {
    let n = libm::round(1.0 / step) as usize;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n - i {
            let k = n - i - j;
            out.push([
                i as f64 / n as f64,
                j as f64 / n as f64,
                k as f64 / n as f64,
            ]);
        }
    }
    out
}

fn blend_mse(w: &[f64; 3], preds: &[[f64; 3]], y: &[f64]) -> f64 {
    preds
        .iter()
        .zip(y)
        .map(|(p, t)| {
            let v = w[0] * p[0] + w[1] * p[1] + w[2] * p[2];
            (v - t) * (v - t)
        })
        .sum::<f64>()
        / y.len() as f64
}

/// Minimum-MSE grid point; near-ties go to the candidate closest to the
/// uniform blend, which is itself a candidate.
fn choose_weights(preds: &[[f64; 3]], y: &[f64], step: f64) -> [f64; 3] {
    const THIRD: f64 = 1.0 / 3.0;
    let mut candidates = alloc::vec![[THIRD; 3]];
    candidates.extend(simplex_grid(step));
    let scored: Vec<(f64, [f64; 3])> = candidates
        .into_iter()
        .map(|w| (blend_mse(&w, preds, y), w))
        .collect();
    let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best);
    let dist = |w: &[f64; 3]| w.iter().map(|v| (v - THIRD) * (v - THIRD)).sum::<f64>();
    let mut pick: Option<[f64; 3]> = None;
    for (m, w) in &scored {
        if *m <= best + tol && pick.map_or(true, |p| dist(w) < dist(&p)) {
            pick = Some(*w);
        }
    }
    pick.unwrap_or([THIRD; 3])
}

fn fit_three(
    xs: &[Vec<f64>],
    y: &[f64],
    cfg: &StackedConfig,
    seed: u64,
) -> Result<(Gbm, Forest, Ridge)> {
    let gbm = fit_gbm(xs, y, cfg.gbm_rounds, cfg.gbm_depth, cfg.gbm_shrinkage);
    let forest = fit_forest(xs, y, &cfg.forest(seed));
    let ridge = fit_ridge(xs, y, cfg.ridge_lambda)?;
    Ok((gbm, forest, ridge))
}

/// K-fold out-of-fold stacking. Examples must carry targets.
pub fn fit_stacked(examples: &[MetaExample], cfg: &StackedConfig) -> Result<StackedFit> {
    cfg.validate()?;
    let k = cfg.folds;
    if examples.len() < k {
        return Err(Error::TooFewExamples {
            needed: k,
            got: examples.len(),
        });
    }
    let xs: Vec<Vec<f64>> = examples.iter().map(MetaExample::features).collect();
    let d = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::DimMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let y: Vec<f64> = examples
        .iter()
        .map(|e| {
            e.target.ok_or_else(|| {
                Error::InvalidConfig(alloc::format!("example {} has no target", e.utt_id))
            })
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..xs.len()).collect();
    shuffle(&mut seeded(derive_seed(cfg.seed, 0xF01D)), &mut order);
    let mut fold_of = alloc::vec![0; xs.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }

    let mut oof = alloc::vec![[0.0; 3]; xs.len()];
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<usize> = (0..xs.len()).filter(|&i| fold_of[i] != f).collect();
        let held_out: Vec<usize> = (0..xs.len()).filter(|&i| fold_of[i] == f).collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| xs[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let (g, fo, r) = fit_three(&tx, &ty, cfg, derive_seed(cfg.seed, 1 + f as u64))?;
        for &i in &held_out {
            oof[i] = [g.predict(&xs[i]), fo.predict(&xs[i]), r.predict(&xs[i])];
        }
        folds.push(FoldRecord { train, held_out });
    }

    let combine_weights = choose_weights(&oof, &y, cfg.grid_step);
    let oof_mse = blend_mse(&combine_weights, &oof, &y);
    let (gbm, forest, ridge) = fit_three(&xs, &y, cfg, derive_seed(cfg.seed, 0))?;
    Ok(StackedFit {
        model: StackedModel {
            n_features: d,
            gbm,
            forest,
            ridge,
            combine_weights,
        },
        folds,
        oof,
        oof_mse,
    })
}
