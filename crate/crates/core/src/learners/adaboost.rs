//! Discrete multiclass AdaBoost (SAMME) over depth-1 trees.

use serde::{Deserialize, Serialize};

use super::tree::grow_tree;
use super::{argmax, check_training, meta, LearnError, ModelParams, Result, TrainedModel, TreeConfig, TreeNode};
use crate::flowdata::{FeatureMatrix, LabelVector};

/// Round weight stored when a stump classifies the weighted data perfectly.
pub const ALPHA_CAP: f64 = 23.025850929940457; // ln(1e10)

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_rounds: 50,
            learning_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub stump: TreeNode,
    pub alpha: f64,
    /// Weighted training error of the stump in its round.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: Vec<BoostRound>,
    pub n_rounds: usize,
    pub learning_rate: f64,
}

/// `learning_rate * (ln((1 - e) / e) + ln(K - 1))`.
pub fn samme_alpha(error: f64, n_classes: usize, learning_rate: f64) -> f64 {
    learning_rate * (((1.0 - error) / error).ln() + ((n_classes - 1) as f64).ln())
}

/// Boost stumps on `(x, y)` starting from uniform weights.
///
/// A round whose weighted error reaches `1 - 1/K` ends training and is not
/// kept; a perfect round is kept with [`ALPHA_CAP`] and ends training.
pub fn adaboost_fit(x: &FeatureMatrix, y: &LabelVector, cfg: &BoostConfig, seed: u64) -> Result<TrainedModel> {
    check_training(x, y)?;
    let n = x.n_rows();
    let uniform = vec![1.0 / n as f64; n];
    let params = boost(x, y, cfg, uniform, seed, None)?;
    Ok(TrainedModel {
        classes: y.classes().to_vec(),
        feature_names: x.names().to_vec(),
        meta: meta(x, seed, cfg),
        scaler: None,
        params: ModelParams::AdaBoost(params),
    })
}

/// Same as [`adaboost_fit`] but starting from caller-supplied sample
/// weights (positive, normalized here to sum 1). Returns the boosted rounds
/// and the normalized weight vector after every kept round.
pub fn adaboost_fit_weighted(
    x: &FeatureMatrix,
    y: &LabelVector,
    cfg: &BoostConfig,
    weights: &[f64],
    seed: u64,
) -> Result<(BoostParams, Vec<Vec<f64>>)> {
    check_training(x, y)?;
    if weights.len() != x.n_rows() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(LearnError::InvalidParameter(
            "need one positive finite weight per row".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    let start = weights.iter().map(|w| w / total).collect();
    let mut trace = Vec::new();
    let params = boost(x, y, cfg, start, seed, Some(&mut trace))?;
    Ok((params, trace))
}

fn boost(
    x: &FeatureMatrix,
    y: &LabelVector,
    cfg: &BoostConfig,
    mut weights: Vec<f64>,
    seed: u64,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<BoostParams> {
    let k = y.classes().len();
    if k < 2 {
        return Err(LearnError::TooFewClasses(k));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(LearnError::InvalidParameter("learning_rate must be positive".into()));
    }
    let stump_cfg = TreeConfig {
        max_depth: Some(1),
        min_samples_split: 2,
        features_per_split: None,
    };
    let n = x.n_rows();
    let chance = 1.0 - 1.0 / k as f64;
    let mut rounds = Vec::new();
    for _ in 0..cfg.n_rounds {
        let stump = grow_tree(x, y, &weights, (0..n).collect(), &stump_cfg, seed)?;
        let miss: Vec<bool> = x
            .rows()
            .zip(y.values())
            .map(|(r, &c)| stump.predict_row(r) != c)
            .collect();
        let error: f64 = weights.iter().zip(&miss).filter(|(_, &m)| m).map(|(w, _)| w).sum();
        if error >= chance {
            break;
        }
        if error <= 0.0 {
            rounds.push(BoostRound {
                stump,
                alpha: ALPHA_CAP,
                error: 0.0,
            });
            break;
        }
        let alpha = samme_alpha(error, k, cfg.learning_rate);
        for (w, &m) in weights.iter_mut().zip(&miss) {
            if m {
                *w *= alpha.exp();
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        if let Some(t) = trace.as_deref_mut() {
            t.push(weights.clone());
        }
        rounds.push(BoostRound { stump, alpha, error });
    }
    Ok(BoostParams {
        rounds,
        n_rounds: cfg.n_rounds,
        learning_rate: cfg.learning_rate,
    })
}

impl BoostParams {
    /// Per-class sum of round weights voting for it.
    pub fn scores(&self, classes: &[u32], row: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; classes.len()];
        for r in &self.rounds {
            if let Ok(i) = classes.binary_search(&r.stump.predict_row(row)) {
                s[i] += r.alpha;
            }
        }
        s
    }

    pub fn predict(&self, classes: &[u32], x: &FeatureMatrix) -> Result<Vec<u32>> {
        if self.rounds.is_empty() {
            return Err(LearnError::NoRounds);
        }
        Ok(x.rows().map(|r| classes[argmax(&self.scores(classes, r))]).collect())
    }
}
