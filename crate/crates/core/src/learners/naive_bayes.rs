use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{argmax, check_training, class_indices, meta, ModelParams, Result, TrainedModel};
use crate::flowdata::{FeatureMatrix, LabelVector};

/// Variance floor factor relative to the largest per-feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian class-conditional parameters, one entry per class in code order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub var_floor: f64,
}

fn population_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Priors are class frequencies; variances are population variances floored
/// at `1e-9 * max feature variance` (or `1e-9` when every feature is
/// constant).
pub fn nb_fit(x: &FeatureMatrix, y: &LabelVector) -> Result<TrainedModel> {
    check_training(x, y)?;
    let n = x.n_rows();
    let d = x.n_cols();
    let k = y.classes().len();
    let idx = class_indices(y);

    let max_var = (0..d)
        .map(|j| population_variance(&x.column(j)).1)
        .fold(0.0, f64::max);
    let var_floor = if max_var > 0.0 {
        VAR_SMOOTHING * max_var
    } else {
        VAR_SMOOTHING
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in idx.iter().enumerate() {
        members[c].push(i);
    }
    let priors = members.iter().map(|m| m.len() as f64 / n as f64).collect();
    let mut means = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for m in &members {
        let (mu, var): (Vec<f64>, Vec<f64>) = (0..d)
            .map(|j| {
                let (mean, var) = population_variance(&m.iter().map(|&i| x.get(i, j)).collect::<Vec<_>>());
                (mean, var.max(var_floor))
            })
            .unzip();
        means.push(mu);
        variances.push(var);
    }
    Ok(TrainedModel {
        classes: y.classes().to_vec(),
        feature_names: x.names().to_vec(),
        meta: meta(x, 0, &serde_json::json!({ "var_smoothing": VAR_SMOOTHING })),
        scaler: None,
        params: ModelParams::NaiveBayes(NaiveBayesParams {
            priors,
            means,
            variances,
            var_floor,
        }),
    })
}

impl NaiveBayesParams {
    /// Log of prior times the Gaussian likelihood, per class.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        self.priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(&prior, (mu, var))| {
                let ll: f64 = row
                    .iter()
                    .zip(mu.iter().zip(var))
                    .map(|(&v, (&m, &s2))| -0.5 * (2.0 * PI * s2).ln() - (v - m) * (v - m) / (2.0 * s2))
                    .sum();
                prior.ln() + ll
            })
            .collect()
    }

    /// Labels and normalized posteriors, computed in log space.
    pub fn predict_proba(&self, classes: &[u32], x: &FeatureMatrix) -> (Vec<u32>, Vec<Vec<f64>>) {
        let mut labels = Vec::with_capacity(x.n_rows());
        let mut posts = Vec::with_capacity(x.n_rows());
        for row in x.rows() {
            let jll = self.joint_log_likelihood(row);
            let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = jll.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let post: Vec<f64> = exps.iter().map(|e| e / total).collect();
            labels.push(classes[argmax(&jll)]);
            posts.push(post);
        }
        (labels, posts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::Target;
    use crate::learners::ModelParams;
    use proptest::prelude::*;

    fn params(m: &TrainedModel) -> &NaiveBayesParams {
        match &m.params {
            ModelParams::NaiveBayes(p) => p,
            _ => unreachable!(),
        }
    }

    fn col(v: &[f64]) -> FeatureMatrix {
        FeatureMatrix::unnamed(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn labels(v: Vec<u32>) -> LabelVector {
        LabelVector::new(v, Target::AttackCategory).unwrap()
    }

    #[test]
    fn single_class_posterior_one() {
        let m = nb_fit(&col(&[1.0, 2.0, 3.0]), &labels(vec![4, 4, 4])).unwrap();
        let probs = m.predict_proba(&col(&[-100.0, 50.0])).unwrap().unwrap();
        assert!(probs.iter().all(|p| p == &vec![1.0]));
        assert_eq!(m.predict(&col(&[0.0])).unwrap(), vec![4]);
    }

    #[test]
    fn priors_are_frequencies() {
        let m = nb_fit(&col(&[0.0, 1.0, 2.0, 9.0]), &labels(vec![0, 0, 0, 1])).unwrap();
        assert_eq!(params(&m).priors, vec![0.75, 0.25]);
    }

    #[test]
    fn nearer_mean_wins() {
        // class 0 at {-1, 1}: mean 0, var 1; class 1 at {9, 11}: mean 10, var 1
        let m = nb_fit(&col(&[-1.0, 1.0, 9.0, 11.0]), &labels(vec![0, 0, 1, 1])).unwrap();
        let p = params(&m);
        assert_eq!(p.means, vec![vec![0.0], vec![10.0]]);
        assert_eq!(p.variances, vec![vec![1.0], vec![1.0]]);
        assert_eq!(m.predict(&col(&[1.0])).unwrap(), vec![0]);
        // midway: exact symmetry
        let probs = m.predict_proba(&col(&[5.0])).unwrap().unwrap();
        assert_eq!(probs[0], vec![0.5, 0.5]);
        assert_eq!(m.predict(&col(&[5.0])).unwrap(), vec![0]);
    }

    #[test]
    fn tiny_variance_is_decisive() {
        let m = nb_fit(
            &col(&[0.0, 0.001, 1.0, 1.001]),
            &labels(vec![0, 0, 1, 1]),
        )
        .unwrap();
        let probs = m.predict_proba(&col(&[1.0005])).unwrap().unwrap();
        assert!(probs[0][1] > 0.999);
    }

    #[test]
    fn zero_variance_is_floored() {
        let m = nb_fit(&col(&[3.0, 3.0, 5.0, 5.0]), &labels(vec![0, 0, 1, 1])).unwrap();
        let p = params(&m);
        assert!(p.variances.iter().flatten().all(|&v| v > 0.0));
        assert_eq!(p.var_floor, 1e-9 * 1.0);
        assert_eq!(m.predict(&col(&[3.0, 5.0])).unwrap(), vec![0, 1]);
    }

    #[test]
    fn dimension_checked() {
        let m = nb_fit(&col(&[0.0, 1.0]), &labels(vec![0, 1])).unwrap();
        let x2 = FeatureMatrix::unnamed(&[vec![0.0, 0.0]]).unwrap();
        assert!(m.predict(&x2).is_err());
    }

    proptest! {
        #[test]
        fn posteriors_normalized(
            rows in proptest::collection::vec(proptest::collection::vec(-20.0f64..20.0, 2), 4..30),
            probe in proptest::collection::vec(-40.0f64..40.0, 2),
        ) {
            let v: Vec<u32> = (0..rows.len()).map(|i| (i % 3) as u32).collect();
            let m = nb_fit(&FeatureMatrix::unnamed(&rows).unwrap(), &labels(v)).unwrap();
            let probs = m.predict_proba(&FeatureMatrix::unnamed(&[probe]).unwrap()).unwrap().unwrap();
            let s: f64 = probs[0].iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn argmax_invariant_under_common_scaling(
            rows in proptest::collection::vec(proptest::collection::vec(-20.0f64..20.0, 2), 4..30),
            probe in proptest::collection::vec(-40.0f64..40.0, 2),
            scale in 0.01f64..100.0,
        ) {
            let v: Vec<u32> = (0..rows.len()).map(|i| (i % 2) as u32).collect();
            let y = labels(v);
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
            let a = nb_fit(&FeatureMatrix::unnamed(&rows).unwrap(), &y).unwrap();
            let b = nb_fit(&FeatureMatrix::unnamed(&scaled).unwrap(), &y).unwrap();
            let pa = a.predict_proba(&FeatureMatrix::unnamed(std::slice::from_ref(&probe)).unwrap()).unwrap().unwrap();
            let sp: Vec<f64> = probe.iter().map(|x| x * scale).collect();
            let pb = b.predict_proba(&FeatureMatrix::unnamed(&[sp]).unwrap()).unwrap().unwrap();
            // skip near-ties where rounding can legitimately flip the winner
            prop_assume!((pa[0][0] - pa[0][1]).abs() > 1e-6);
            prop_assert_eq!(argmax(&pa[0]), argmax(&pb[0]));
        }
    }
}
