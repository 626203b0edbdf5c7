use serde::{Deserialize, Serialize};

use super::tree::grow_tree;
use super::{check_training, meta, LearnError, ModelParams, Result, TrainedModel, TreeConfig, TreeNode};
use crate::flowdata::{FeatureMatrix, LabelVector};
use crate::rng::{derive_seed, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            features_per_split: None,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<TreeNode>,
    pub n_trees: usize,
    pub bootstrap: bool,
    pub features_per_split: usize,
    pub seed: u64,
}

fn sqrt_features(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).max(1)
}

/// Seed of tree `index`; also the seed of its bootstrap draw.
pub fn tree_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Bagged CART trees. Tree `i` draws its bootstrap rows and then its
/// per-node feature subsets from one generator seeded with
/// `tree_seed(seed, i)`.
pub fn forest_fit(x: &FeatureMatrix, y: &LabelVector, cfg: &ForestConfig, seed: u64) -> Result<TrainedModel> {
    check_training(x, y)?;
    if cfg.n_trees == 0 {
        return Err(LearnError::InvalidParameter("n_trees must be at least 1".into()));
    }
    let n = x.n_rows();
    let fps = cfg.features_per_split.unwrap_or_else(|| sqrt_features(x.n_cols()));
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        features_per_split: Some(fps),
    };
    let w = vec![1.0; n];
    let trees = (0..cfg.n_trees)
        .map(|i| {
            let s = tree_seed(seed, i);
            let (rows, grow_seed) = if cfg.bootstrap {
                let mut rng = SeededRng::new(s);
                let rows = (0..n).map(|_| rng.below_usize(n)).collect();
                (rows, rng.next_u64())
            } else {
                ((0..n).collect(), s)
            };
            grow_tree(x, y, &w, rows, &tree_cfg, grow_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedModel {
        classes: y.classes().to_vec(),
        feature_names: x.names().to_vec(),
        meta: meta(x, seed, cfg),
        scaler: None,
        params: ModelParams::RandomForest(ForestParams {
            trees,
            n_trees: cfg.n_trees,
            bootstrap: cfg.bootstrap,
            features_per_split: fps,
            seed,
        }),
    })
}

impl ForestParams {
    /// Votes per class (in `classes` order) for one row.
    pub fn votes(&self, classes: &[u32], row: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; classes.len()];
        for t in &self.trees {
            let c = t.predict_row(row);
            if let Ok(i) = classes.binary_search(&c) {
                votes[i] += 1;
            }
        }
        votes
    }

    /// Majority label (lower code on ties) and vote margin per row.
    pub fn predict_with_margin(&self, classes: &[u32], x: &FeatureMatrix) -> (Vec<u32>, Vec<f64>) {
        x.rows()
            .map(|r| {
                let votes = self.votes(classes, r);
                let best = super::argmax(&votes);
                let runner_up = votes
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != best)
                    .map(|(_, &v)| v)
                    .max()
                    .unwrap_or(0);
                let margin = (votes[best] - runner_up) as f64 / self.trees.len() as f64;
                (classes[best], margin)
            })
            .unzip()
    }
}
