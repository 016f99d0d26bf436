//! "ATEN" ensemble models: magic, u32 version, u64 JSON length, JSON body
//! with trees written as nested objects.

use std::fs;
use std::path::Path;

use atca_core::ensemble::{Forest, Gbm, RegTree, Ridge, StackedModel, TreeNode};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ATEN";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Nested {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Nested>,
        right: Box<Nested>,
    },
    Leaf {
        value: f64,
    },
}

fn nest(t: &RegTree, i: usize) -> Nested {
    match t.nodes[i] {
        TreeNode::Leaf { value } => Nested::Leaf { value },
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => Nested::Split {
            feature,
            threshold,
            left: Box::new(nest(t, left)),
            right: Box::new(nest(t, right)),
        },
    }
}

fn flatten(n: &Nested, nodes: &mut Vec<TreeNode>) -> usize {
    let slot = nodes.len();
    match n {
        Nested::Leaf { value } => nodes.push(TreeNode::Leaf { value: *value }),
        Nested::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            nodes.push(TreeNode::Leaf { value: 0.0 });
            let l = flatten(left, nodes);
            let r = flatten(right, nodes);
            nodes[slot] = TreeNode::Split {
                feature: *feature,
                threshold: *threshold,
                left: l,
                right: r,
            };
        }
    }
    slot
}

fn unnest(n: &Nested) -> RegTree {
    let mut nodes = Vec::new();
    flatten(n, &mut nodes);
    RegTree { nodes }
}

#[derive(Debug, Serialize, Deserialize)]
struct GbmRound {
    shrinkage: f64,
    tree: Nested,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    n_features: usize,
    combine_weights: [f64; 3],
    gbm_init: f64,
    gbm: Vec<GbmRound>,
    forest: Vec<Nested>,
    forest_seeds: Vec<u64>,
    ridge: Ridge,
}

pub fn encode_ensemble(m: &StackedModel) -> Vec<u8> {
    let body = ModelJson {
        n_features: m.n_features,
        combine_weights: m.combine_weights,
        gbm_init: m.gbm.init,
        gbm: m
            .gbm
            .trees
            .iter()
            .map(|(t, s)| GbmRound {
                shrinkage: *s,
                tree: nest(t, 0),
            })
            .collect(),
        forest: m.forest.trees.iter().map(|t| nest(t, 0)).collect(),
        forest_seeds: m.forest.tree_seeds.clone(),
        ridge: m.ridge.clone(),
    };
    let json = serde_json::to_vec(&body).expect("model serialises");
    let mut out = Vec::with_capacity(16 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out
}

pub fn decode_ensemble(bytes: &[u8], path: &Path) -> Result<StackedModel> {
    let bad = |why: String| Error::BadHeader {
        path: path.into(),
        why,
    };
    if bytes.len() < 16 {
        return Err(Error::TruncatedFile(path.into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("magic is not ATEN".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() - 16 != len {
        return Err(Error::TruncatedFile(path.into()));
    }
    let body: ModelJson = serde_json::from_slice(&bytes[16..]).map_err(|e| Error::BadJson {
        path: path.into(),
        line: 1,
        why: e.to_string(),
    })?;
    Ok(StackedModel {
        n_features: body.n_features,
        gbm: Gbm {
            init: body.gbm_init,
            trees: body
                .gbm
                .iter()
                .map(|r| (unnest(&r.tree), r.shrinkage))
                .collect(),
        },
        forest: Forest {
            trees: body.forest.iter().map(unnest).collect(),
            tree_seeds: body.forest_seeds,
        },
        ridge: body.ridge,
        combine_weights: body.combine_weights,
    })
}

pub fn save_ensemble(path: &Path, m: &StackedModel) -> Result<()> {
    fs::write(path, encode_ensemble(m)).map_err(Error::io(path))
}

pub fn load_ensemble(path: &Path) -> Result<StackedModel> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode_ensemble(&bytes, path)
}
