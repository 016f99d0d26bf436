use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_sampled, FeatureSampler, RegTree};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub feature_frac: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            feature_frac: 1.0 / 3.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegTree>,
    /// Seed each tree's bootstrap sample and feature draws came from.
    pub tree_seeds: Vec<u64>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_forest(xs: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Forest {
    let n = y.len();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut tree_seeds = Vec::with_capacity(cfg.n_trees);
    for t in 0..cfg.n_trees.max(1) {
        let seed = derive_seed(cfg.seed, t as u64);
        let mut rng = seeded(seed);
        let idx: Vec<usize> = if cfg.bootstrap && n > 0 {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let sampler = FeatureSampler {
            frac: cfg.feature_frac,
            rng: &mut rng,
        };
        trees.push(fit_tree_sampled(xs, y, &idx, cfg.max_depth, Some(sampler)));
        tree_seeds.push(seed);
    }
    Forest { trees, tree_seeds }
}
