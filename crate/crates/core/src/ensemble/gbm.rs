use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, RegTree};
use crate::math::mean;

/// Gradient-boosted regression trees under squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    pub init: f64,
    /// `(tree, shrinkage)` per round.
    pub trees: Vec<(RegTree, f64)>,
}

impl Gbm {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.init
            + self
                .trees
                .iter()
                .map(|(t, s)| s * t.predict(x))
                .sum::<f64>()
    }
}

/// `init = mean(y)`; each round fits a depth-limited tree to the current
/// residuals and adds it scaled by `shrinkage`.
pub fn fit_gbm(xs: &[Vec<f64>], y: &[f64], rounds: usize, depth: usize, shrinkage: f64) -> Gbm {
    let init = mean(y);
    let mut pred = alloc::vec![init; y.len()];
    let idx: Vec<usize> = (0..y.len()).collect();
    let mut trees = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
        let tree = fit_tree(xs, &residual, &idx, depth);
        for (p, x) in pred.iter_mut().zip(xs) {
            *p += shrinkage * tree.predict(x);
        }
        trees.push((tree, shrinkage));
    }
    Gbm { init, trees }
}
