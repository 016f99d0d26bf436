//! Stacked regression ensemble: out-of-fold blending of gradient boosting,
//! a random forest and ridge regression over base-system scores plus pooled
//! text features, trained on squared error.

mod forest;
mod gbm;
mod meta;
mod ridge;
mod stacked;
mod tree;

pub use forest::{fit_forest, Forest, ForestConfig};
pub use gbm::{fit_gbm, Gbm};
pub use meta::{build_meta_examples, MetaExample};
pub use ridge::{fit_ridge, Ridge};
pub use stacked::{
    fit_stacked, predict_stacked, simplex_grid, FoldRecord, StackedConfig, StackedFit, StackedModel,
};
pub use tree::{fit_tree, RegTree, TreeNode};
