use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<TreeNode>,
}

impl RegTree {
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: alloc::vec![TreeNode::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegTree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

/// Random feature subsampling for forest trees.
pub(crate) struct FeatureSampler<'a> {
    pub frac: f64,
    pub rng: &'a mut SeededRng,
}

impl FeatureSampler<'_> {
    fn draw(&mut self, n_features: usize) -> Vec<usize> {
        let k = (libm::ceil(self.frac * n_features as f64) as usize).clamp(1, n_features);
        let mut all: Vec<usize> = (0..n_features).collect();
        if k < n_features {
            for i in 0..k {
                let j = self.rng.gen_range(i..n_features);
                all.swap(i, j);
            }
            all.truncate(k);
            all.sort_unstable();
        }
        all
    }
}

struct Builder<'a, 'r> {
    xs: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: usize,
    sampler: Option<FeatureSampler<'r>>,
    nodes: Vec<TreeNode>,
}

impl Builder<'_, '_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len() as f64;
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n;
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: mean });
        if depth >= self.max_depth || idx.len() < 2 {
            return slot;
        }
        let Some((feature, threshold)) = self.best_split(idx, sum) else {
            return slot;
        };
        let mut left: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.xs[i][feature] <= threshold)
            .collect();
        let mut right: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.xs[i][feature] > threshold)
            .collect();
        let l = self.build(&mut left, depth + 1);
        let r = self.build(&mut right, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        slot
    }

    /// Exact enumeration of thresholds (midpoints between distinct sorted
    /// values) maximising the reduction in squared error.
    fn best_split(&mut self, idx: &[usize], total: f64) -> Option<(usize, f64)> {
        let d = self.xs[idx[0]].len();
        let features = match &mut self.sampler {
            Some(s) => s.draw(d),
            None => (0..d).collect(),
        };
        let n = idx.len() as f64;
        let parent = total * total / n;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
            let mut left_sum = 0.0;
            for k in 0..order.len() - 1 {
                left_sum += self.y[order[k]];
                let (v, next) = (self.xs[order[k]][f], self.xs[order[k + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                // SSE reduction = Σl²/nl + Σr²/nr - Σ²/n
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if gain > 1e-12 * (1.0 + parent.abs()) && best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, v + (next - v) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Fit a depth-limited regression tree on `idx` (repeats allowed, for
/// bootstrap samples).
pub fn fit_tree(xs: &[Vec<f64>], y: &[f64], idx: &[usize], max_depth: usize) -> RegTree {
    fit_tree_sampled(xs, y, idx, max_depth, None)
}

pub(crate) fn fit_tree_sampled(
    xs: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    max_depth: usize,
    sampler: Option<FeatureSampler<'_>>,
) -> RegTree {
    if idx.is_empty() {
        return RegTree::constant(0.0);
    }
    let mut b = Builder {
        xs,
        y,
        max_depth,
        sampler,
        nodes: Vec::new(),
    };
    let mut work = idx.to_vec();
    b.build(&mut work, 0);
    RegTree { nodes: b.nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn stump_splits_at_midpoint() {
        let xs = vec![vec![0.0], vec![1.0]];
        let t = fit_tree(&xs, &[0.0, 1.0], &[0, 1], 1);
        assert_eq!(
            t.nodes[0],
            TreeNode::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(t.predict(&[0.0]), 0.0);
        assert_eq!(t.predict(&[1.0]), 1.0);
    }

    #[test]
    fn depth_limit_and_constant_targets() {
        let xs: Vec<Vec<f64>> = (0..32)
            .map(|i| vec![f64::from(i), f64::from(i % 5)])
            .collect();
        let y: Vec<f64> = (0..32).map(|i| f64::from(i * i % 7)).collect();
        let idx: Vec<usize> = (0..32).collect();
        for depth in 0..5 {
            assert!(fit_tree(&xs, &y, &idx, depth).depth() <= depth);
        }
        let flat = fit_tree(&xs, &[2.5; 32], &idx, 6);
        assert_eq!(flat.nodes.len(), 1);
        assert_eq!(flat.predict(&[3.0, 1.0]), 2.5);
    }

    #[test]
    fn picks_the_informative_feature() {
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![f64::from(i % 3), f64::from(i)])
            .collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let t = fit_tree(&xs, &y, &(0..20).collect::<Vec<_>>(), 1);
        assert!(
            matches!(t.nodes[0], TreeNode::Split { feature: 1, threshold, .. } if threshold == 9.5)
        );
    }
}
