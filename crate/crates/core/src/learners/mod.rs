//! From-scratch classifiers behind one fit/predict contract.
//!
//! Every learner works on class *codes* (`u32`), keeps the sorted list of
//! training classes, and resolves ties toward the lower code. Fitted models
//! are plain data ([`TrainedModel`]) and can be saved as versioned JSON.

mod adaboost;
mod forest;
mod knn;
mod naive_bayes;
mod persist;
mod scaler;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowdata::{FeatureMatrix, LabelVector};
use crate::rng::{derive_seed, streams};

pub use adaboost::{adaboost_fit, adaboost_fit_weighted, samme_alpha, BoostConfig, BoostParams, BoostRound, ALPHA_CAP};
pub use forest::{forest_fit, ForestConfig, ForestParams};
pub use knn::{knn_fit, KnnConfig, KnnParams};
pub use naive_bayes::{nb_fit, NaiveBayesParams};
pub use persist::{from_json as model_from_json, load_model, save_model, to_json as model_to_json, FORMAT_VERSION};
pub use scaler::Standardizer;
pub use tree::{tree_fit, weighted_gini, TreeConfig, TreeNode};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("boosted model has no rounds")]
    NoRounds,
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("model file version {found} is not supported (this build reads {supported})")]
    VersionMismatch { found: u64, supported: u64 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    Knn,
    DecisionTree,
    RandomForest,
    AdaBoost,
}

impl ModelKind {
    /// The four families compared in the model table.
    pub const COMPARED: [ModelKind; 4] = [
        ModelKind::NaiveBayes,
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::AdaBoost,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "nb",
            ModelKind::Knn => "knn",
            ModelKind::DecisionTree => "tree",
            ModelKind::RandomForest => "rf",
            ModelKind::AdaBoost => "ada",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "Naive Bayes Classifier",
            ModelKind::Knn => "K-Nearest Neighbors Classifier",
            ModelKind::DecisionTree => "Decision Tree Classifier",
            ModelKind::RandomForest => "Random Forest Classifier",
            ModelKind::AdaBoost => "AdaBoost Classifier",
        }
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        [
            ModelKind::NaiveBayes,
            ModelKind::Knn,
            ModelKind::DecisionTree,
            ModelKind::RandomForest,
            ModelKind::AdaBoost,
        ]
        .into_iter()
        .find(|k| k.short_name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub n_rows: usize,
    pub n_features: usize,
    pub hyperparameters: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes(NaiveBayesParams),
    Knn(KnnParams),
    DecisionTree(TreeNode),
    RandomForest(ForestParams),
    AdaBoost(BoostParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub classes: Vec<u32>,
    pub feature_names: Vec<String>,
    pub meta: TrainMeta,
    /// Applied to inputs before prediction when the model was trained on
    /// standardized features.
    pub scaler: Option<Standardizer>,
    pub params: ModelParams,
}

/// All per-family hyperparameters, with the toolkit defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub knn: KnnConfig,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub adaboost: BoostConfig,
}

/// Fit one model family with the seed derivation used throughout the
/// toolkit.
pub fn fit(
    kind: ModelKind,
    x: &FeatureMatrix,
    y: &LabelVector,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<TrainedModel> {
    match kind {
        ModelKind::NaiveBayes => nb_fit(x, y),
        ModelKind::Knn => knn_fit(x, y, &hp.knn),
        ModelKind::DecisionTree => {
            let seed = derive_seed(seed, streams::TREE);
            let root = tree_fit(x, y, &hp.tree, seed)?;
            Ok(TrainedModel {
                classes: y.classes().to_vec(),
                feature_names: x.names().to_vec(),
                meta: meta(x, seed, &hp.tree),
                scaler: None,
                params: ModelParams::DecisionTree(root),
            })
        }
        ModelKind::RandomForest => forest_fit(x, y, &hp.forest, derive_seed(seed, streams::FOREST)),
        ModelKind::AdaBoost => adaboost_fit(x, y, &hp.adaboost, derive_seed(seed, streams::ADABOOST)),
    }
}

pub(crate) fn meta<H: Serialize>(x: &FeatureMatrix, seed: u64, hp: &H) -> TrainMeta {
    TrainMeta {
        seed,
        n_rows: x.n_rows(),
        n_features: x.n_cols(),
        hyperparameters: serde_json::to_value(hp).expect("hyperparameters serialize"),
    }
}

pub(crate) fn check_training(x: &FeatureMatrix, y: &LabelVector) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(LearnError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(LearnError::EmptyTraining);
    }
    Ok(())
}

/// Map each label to its position in the sorted class list.
pub(crate) fn class_indices(y: &LabelVector) -> Vec<usize> {
    let classes = y.classes();
    y.values()
        .iter()
        .map(|c| classes.binary_search(c).expect("label belongs to its class list"))
        .collect()
}

/// Index of the maximum, lowest index on ties.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::DecisionTree(_) => ModelKind::DecisionTree,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::AdaBoost(_) => ModelKind::AdaBoost,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn with_scaler(mut self, scaler: Standardizer) -> Self {
        self.scaler = Some(scaler);
        self
    }

    fn prepare(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.n_cols() != self.n_features() {
            return Err(LearnError::DimensionMismatch {
                expected: self.n_features(),
                got: x.n_cols(),
            });
        }
        Ok(match &self.scaler {
            Some(s) => s.transform(x)?,
            None => x.clone(),
        })
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u32>> {
        let x = self.prepare(x)?;
        match &self.params {
            ModelParams::NaiveBayes(p) => Ok(p.predict_proba(&self.classes, &x).0),
            ModelParams::Knn(p) => Ok(p.predict(&x)),
            ModelParams::DecisionTree(root) => Ok(x.rows().map(|r| root.predict_row(r)).collect()),
            ModelParams::RandomForest(p) => Ok(p.predict_with_margin(&self.classes, &x).0),
            ModelParams::AdaBoost(p) => p.predict(&self.classes, &x),
        }
    }

    /// Naive Bayes posteriors over `classes`; `None` for other families.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Option<Vec<Vec<f64>>>> {
        let x = self.prepare(x)?;
        Ok(match &self.params {
            ModelParams::NaiveBayes(p) => Some(p.predict_proba(&self.classes, &x).1),
            _ => None,
        })
    }

    /// Forest predictions with `(top votes - runner-up votes) / n_trees` per
    /// row; `None` for other families.
    pub fn predict_with_margin(&self, x: &FeatureMatrix) -> Result<Option<(Vec<u32>, Vec<f64>)>> {
        let x = self.prepare(x)?;
        Ok(match &self.params {
            ModelParams::RandomForest(p) => Some(p.predict_with_margin(&self.classes, &x)),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2u32, 2]), 0);
    }

    #[test]
    fn short_names_round_trip() {
        for k in ModelKind::COMPARED {
            assert_eq!(ModelKind::from_short_name(k.short_name()), Some(k));
        }
        assert_eq!(ModelKind::from_short_name("svm"), None);
    }
}
