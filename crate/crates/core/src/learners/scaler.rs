use serde::{Deserialize, Serialize};

use super::{LearnError, Result};
use crate::flowdata::FeatureMatrix;

/// Per-feature `(x - mean) / std`, fitted on training rows only.
/// Constant features keep a unit divisor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Result<Self> {
        if x.n_rows() == 0 {
            return Err(LearnError::EmptyTraining);
        }
        let n = x.n_rows() as f64;
        let (means, stds) = (0..x.n_cols())
            .map(|j| {
                let col = x.column(j);
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let std = var.sqrt();
                (mean, if std > 0.0 { std } else { 1.0 })
            })
            .unzip();
        Ok(Self { means, stds })
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.n_cols() != self.means.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.means.len(),
                got: x.n_cols(),
            });
        }
        x.map_values(|j, v| (v - self.means[j]) / self.stds[j])
            .map_err(|e| LearnError::InvalidParameter(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_columns() {
        let x = FeatureMatrix::unnamed(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.means, vec![2.0, 5.0]);
        assert_eq!(s.stds, vec![1.0, 1.0]);
        let t = s.transform(&x).unwrap();
        assert_eq!(t.column(0), vec![-1.0, 1.0]);
        assert_eq!(t.column(1), vec![0.0, 0.0]);
    }
}
