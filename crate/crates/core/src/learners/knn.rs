use serde::{Deserialize, Serialize};

use super::{check_training, meta, LearnError, ModelParams, Result, TrainedModel};
use crate::flowdata::{FeatureMatrix, LabelVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Lazy learner state: the training rows verbatim plus the clipped `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub x: FeatureMatrix,
    pub y: Vec<u32>,
}

pub fn knn_fit(x: &FeatureMatrix, y: &LabelVector, cfg: &KnnConfig) -> Result<TrainedModel> {
    if cfg.k == 0 {
        return Err(LearnError::InvalidParameter("knn k must be at least 1".into()));
    }
    check_training(x, y)?;
    Ok(TrainedModel {
        classes: y.classes().to_vec(),
        feature_names: x.names().to_vec(),
        meta: meta(x, 0, cfg),
        scaler: None,
        params: ModelParams::Knn(KnnParams {
            k: cfg.k.min(x.n_rows()),
            x: x.clone(),
            y: y.values().to_vec(),
        }),
    })
}

impl KnnParams {
    /// Indices of the `k` nearest training rows, nearest first; equal
    /// distances order by lower training index.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        let mut cand: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if cand.len() > self.k {
            cand.select_nth_unstable_by(self.k - 1, order);
            cand.truncate(self.k);
        }
        cand.sort_by(order);
        cand.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority vote; a vote tie goes to the tied class whose member is
    /// nearest.
    pub fn vote(&self, neighbours: &[usize]) -> u32 {
        let mut tally: Vec<(u32, usize)> = Vec::new();
        for &i in neighbours {
            let c = self.y[i];
            match tally.iter_mut().find(|(cls, _)| *cls == c) {
                Some(entry) => entry.1 += 1,
                None => tally.push((c, 1)),
            }
        }
        let top = tally.iter().map(|t| t.1).max().unwrap_or(0);
        // tally is in order of first appearance, i.e. nearest member first
        tally
            .into_iter()
            .find(|t| t.1 == top)
            .map(|t| t.0)
            .expect("k >= 1 neighbours")
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<u32> {
        x.rows().map(|q| self.vote(&self.neighbours(q))).collect()
    }
}
