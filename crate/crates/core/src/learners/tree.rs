//! CART decision trees grown on weighted Gini impurity.

use serde::{Deserialize, Serialize};

use super::{argmax, check_training, class_indices, LearnError, Result};
use crate::flowdata::{FeatureMatrix, LabelVector};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per node; `None` means all of them.
    pub features_per_split: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
        }
    }
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: u32,
        /// Training samples reaching this leaf, per class in code order.
        counts: Vec<u64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict_row(&self, row: &[f64]) -> u32 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<u32> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Training samples that reached this node.
    pub fn samples(&self) -> u64 {
        match self {
            TreeNode::Leaf { counts, .. } => counts.iter().sum(),
            TreeNode::Split { left, right, .. } => left.samples() + right.samples(),
        }
    }

    /// Largest feature index used by any split, for load-time validation.
    pub(crate) fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => Some(
                [Some(*feature), left.max_feature(), right.max_feature()]
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap_or(*feature),
            ),
        }
    }

    pub(crate) fn classes_used(&self, out: &mut Vec<u32>) {
        match self {
            TreeNode::Leaf { class, .. } => out.push(*class),
            TreeNode::Split { left, right, .. } => {
                left.classes_used(out);
                right.classes_used(out);
            }
        }
    }
}

/// Weighted Gini impurity of a two-way split given per-class weight sums.
///
/// `(W_l * G_l + W_r * G_r) / W` with `G = 1 - sum(p_c^2)`.
pub fn weighted_gini(left: &[f64], right: &[f64]) -> f64 {
    let wl: f64 = left.iter().sum();
    let wr: f64 = right.iter().sum();
    let w = wl + wr;
    let part = |c: &[f64], t: f64| {
        if t > 0.0 {
            t - c.iter().map(|v| v * v).sum::<f64>() / t
        } else {
            0.0
        }
    };
    (part(left, wl) + part(right, wr)) / w
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gini: f64,
}

pub(crate) struct Grower<'a> {
    pub x: &'a FeatureMatrix,
    /// Class position of every training row.
    pub y: &'a [usize],
    /// Per-row sample weight.
    pub w: &'a [f64],
    pub classes: &'a [u32],
    pub cfg: &'a TreeConfig,
    pub rng: SeededRng,
}

impl Grower<'_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let k = self.classes.len();
        let mut counts = vec![0u64; k];
        let mut mass = vec![0.0f64; k];
        for &r in rows {
            counts[self.y[r]] += 1;
            mass[self.y[r]] += self.w[r];
        }
        TreeNode::Leaf {
            class: self.classes[argmax(&mass)],
            counts,
        }
    }

    pub fn grow(&mut self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let pure = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        let depth_hit = self.cfg.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_hit || rows.len() < self.cfg.min_samples_split.max(2) {
            return self.leaf(&rows);
        }
        let Some(choice) = self.best_split(&rows) else {
            return self.leaf(&rows);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.get(r, choice.feature) <= choice.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        TreeNode::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Feature order for one node: natural order when every feature is
    /// examined, otherwise a seeded shuffle whose first `m` entries are the
    /// candidates. Later entries are only used when none of the first `m`
    /// admits a split.
    fn feature_order(&mut self) -> (Vec<usize>, usize) {
        let d = self.x.n_cols();
        let m = self.cfg.features_per_split.unwrap_or(d).clamp(1, d.max(1));
        let mut order: Vec<usize> = (0..d).collect();
        if m < d {
            self.rng.shuffle(&mut order);
        }
        (order, m)
    }

    pub fn best_split(&mut self, rows: &[usize]) -> Option<SplitChoice> {
        let (order, m) = self.feature_order();
        let mut best: Option<SplitChoice> = None;
        for (pos, &f) in order.iter().enumerate() {
            if pos >= m && best.is_some() {
                break;
            }
            if let Some(c) = self.best_threshold(rows, f) {
                if best.is_none_or(|b| c.gini < b.gini) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_threshold(&self, rows: &[usize], feature: usize) -> Option<SplitChoice> {
        let k = self.classes.len();
        let mut sorted: Vec<(f64, usize)> = rows.iter().map(|&r| (self.x.get(r, feature), r)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut right = vec![0.0; k];
        for &(_, r) in &sorted {
            right[self.y[r]] += self.w[r];
        }
        let mut left = vec![0.0; k];
        let mut best: Option<SplitChoice> = None;
        for p in 0..sorted.len() - 1 {
            let (v, r) = sorted[p];
            left[self.y[r]] += self.w[r];
            right[self.y[r]] -= self.w[r];
            let next = sorted[p + 1].0;
            if v == next {
                continue;
            }
            let gini = weighted_gini(&left, &right);
            if best.is_none_or(|b| gini < b.gini) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    gini,
                });
            }
        }
        best
    }
}

/// Grow one CART tree on all rows of `(x, y)` with unit weights.
pub fn tree_fit(x: &FeatureMatrix, y: &LabelVector, cfg: &TreeConfig, seed: u64) -> Result<TreeNode> {
    check_training(x, y)?;
    let w = vec![1.0; x.n_rows()];
    grow_tree(x, y, &w, (0..x.n_rows()).collect(), cfg, seed)
}

/// Grow a tree on `rows` (duplicates allowed) with per-row weights `w`.
pub(crate) fn grow_tree(
    x: &FeatureMatrix,
    y: &LabelVector,
    w: &[f64],
    rows: Vec<usize>,
    cfg: &TreeConfig,
    seed: u64,
) -> Result<TreeNode> {
    if cfg.features_per_split == Some(0) {
        return Err(LearnError::InvalidParameter("features_per_split must be at least 1".into()));
    }
    if rows.is_empty() {
        return Err(LearnError::EmptyTraining);
    }
    let idx = class_indices(y);
    let mut grower = Grower {
        x,
        y: &idx,
        w,
        classes: y.classes(),
        cfg,
        rng: SeededRng::new(seed),
    };
    Ok(grower.grow(rows, 0))
}
