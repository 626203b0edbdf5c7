//! Versioned JSON model files:
//! `{version, algorithm, classes, feature_names, train_meta, scaler, params}`.
//!
//! Reals are written in shortest round-trip form, so `load(save(m)) == m`
//! exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LearnError, ModelParams, Result, Standardizer, TrainMeta, TrainedModel};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    classes: Vec<u32>,
    feature_names: Vec<String>,
    train_meta: TrainMeta,
    #[serde(default)]
    scaler: Option<Standardizer>,
    #[serde(flatten)]
    params: ModelParams,
}

pub fn to_json(model: &TrainedModel) -> String {
    let file = ModelFile {
        version: FORMAT_VERSION,
        classes: model.classes.clone(),
        feature_names: model.feature_names.clone(),
        train_meta: model.meta.clone(),
        scaler: model.scaler.clone(),
        params: model.params.clone(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, to_json(model))?;
    Ok(())
}

fn corrupt(msg: impl std::fmt::Display) -> LearnError {
    LearnError::CorruptModel(msg.to_string())
}

pub fn from_json(text: &str) -> Result<TrainedModel> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = serde_json::Value::deserialize(&mut de).map_err(corrupt)?;
    de.end().map_err(corrupt)?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("missing version"))?;
    if version != FORMAT_VERSION {
        return Err(LearnError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(corrupt)?;
    let model = TrainedModel {
        classes: file.classes,
        feature_names: file.feature_names,
        meta: file.train_meta,
        scaler: file.scaler,
        params: file.params,
    };
    validate(&model)?;
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path)?;
    from_json(&text)
}

fn validate(m: &TrainedModel) -> Result<()> {
    if m.classes.is_empty() || m.classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(corrupt("class list must be non-empty and strictly ascending"));
    }
    let d = m.n_features();
    let k = m.classes.len();
    let tree_ok = |t: &super::TreeNode| {
        let mut used = Vec::new();
        t.classes_used(&mut used);
        t.max_feature().is_none_or(|f| f < d) && used.iter().all(|c| m.classes.binary_search(c).is_ok())
    };
    let ok = match &m.params {
        ModelParams::NaiveBayes(p) => {
            p.priors.len() == k
                && p.means.len() == k
                && p.variances.len() == k
                && p.means.iter().chain(&p.variances).all(|v| v.len() == d)
                && p.variances.iter().flatten().all(|&v| v > 0.0)
        }
        ModelParams::Knn(p) => {
            p.k >= 1
                && p.k <= p.x.n_rows()
                && p.x.n_cols() == d
                && p.y.len() == p.x.n_rows()
                && p.y.iter().all(|c| m.classes.binary_search(c).is_ok())
        }
        ModelParams::DecisionTree(t) => tree_ok(t),
        ModelParams::RandomForest(p) => p.trees.len() == p.n_trees && p.trees.iter().all(tree_ok),
        ModelParams::AdaBoost(p) => p.rounds.iter().all(|r| r.alpha > 0.0 && tree_ok(&r.stump)),
    };
    if !ok {
        return Err(corrupt("parameters inconsistent with classes or features"));
    }
    if let Some(s) = &m.scaler {
        if s.means.len() != d || s.stds.len() != d {
            return Err(corrupt("scaler width does not match features"));
        }
    }
    Ok(())
}
