//! Exploratory statistics over the assembled feature matrix: histograms,
//! class counts, Pearson correlation and correlation-threshold dropping.

pub mod export;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowdata::{FeatureMatrix, LabelVector};

pub use export::{
    class_distribution_svg, correlation_csv, heatmap_svg, histogram_csv, histogram_svg,
};

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
pub enum EdaError {
    #[error("no finite values to bin")]
    EmptyInput,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("correlation needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub column: String,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Equal-width histogram over `[min, max]` of the finite entries of `values`.
///
/// The last bin includes its right edge. A constant input yields one bin of
/// width 1 centred on the value.
pub fn histogram(column: &str, values: &[f64], bins: usize) -> Result<Histogram, EdaError> {
    if bins == 0 {
        return Err(EdaError::ZeroBins);
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(EdaError::EmptyInput);
    }
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    if min == max || !(width > 0.0) || !width.is_finite() {
        return Ok(Histogram {
            column: column.to_string(),
            bin_edges: vec![min - 0.5, min + 0.5],
            counts: vec![finite.len() as u64],
        });
    }
    let mut counts = vec![0u64; bins];
    for v in &finite {
        let b = (((v - min) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| min + i as f64 * width).collect();
    bin_edges.push(max);
    if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        // range narrower than the float spacing can resolve
        return Ok(Histogram {
            column: column.to_string(),
            bin_edges: vec![min, max],
            counts: vec![finite.len() as u64],
        });
    }
    Ok(Histogram {
        column: column.to_string(),
        bin_edges,
        counts,
    })
}

/// Histogram of every column of `x`, in column order.
pub fn histograms(x: &FeatureMatrix, bins: usize) -> Result<Vec<Histogram>, EdaError> {
    (0..x.n_cols())
        .map(|j| histogram(&x.names()[j], &x.column(j), bins))
        .collect()
}

/// Count per class code; absent classes do not appear.
pub fn class_distribution(y: &LabelVector) -> BTreeMap<u32, usize> {
    let mut out = BTreeMap::new();
    for &c in y.values() {
        *out.entry(c).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    /// Zero-variance columns; their rows and columns of `r` are 0.
    pub degenerate: Vec<String>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i][j]
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate.contains(&self.names[j])
    }
}

/// Pearson correlation of every column pair, population normalization.
pub fn pearson(x: &FeatureMatrix) -> Result<CorrelationMatrix, EdaError> {
    let n = x.n_rows();
    if n < 2 {
        return Err(EdaError::TooFewRows(n));
    }
    let d = x.n_cols();
    let columns: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|v| v - mean).collect()
        })
        .collect();
    // A column is degenerate when all its values are identical; testing the
    // raw values avoids mistaking rounding residue for variance.
    let constant: Vec<bool> = columns
        .iter()
        .map(|c| c.iter().all(|&v| v == c[0]))
        .collect();
    let ss: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64)
        .collect();

    let mut r = vec![vec![0.0; d]; d];
    for i in 0..d {
        if constant[i] {
            continue;
        }
        r[i][i] = 1.0;
        for j in (i + 1)..d {
            if constant[j] {
                continue;
            }
            let cov = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64;
            let v = (cov / (ss[i].sqrt() * ss[j].sqrt())).clamp(-1.0, 1.0);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    let degenerate = (0..d)
        .filter(|&j| constant[j])
        .map(|j| x.names()[j].clone())
        .collect();
    Ok(CorrelationMatrix {
        names: x.names().to_vec(),
        r,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    pub partner: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub kept: Vec<String>,
    pub dropped: Vec<DroppedFeature>,
    pub threshold: f64,
}

/// Scan pairs `(i, j)`, `i < j`, in column order and drop `j` when
/// `|r| >= threshold` against a still-kept `i`.
pub fn drop_correlated(c: &CorrelationMatrix, threshold: f64) -> Result<FeatureSelection, EdaError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(EdaError::InvalidThreshold(threshold));
    }
    let d = c.names.len();
    let mut dropped_flag = vec![false; d];
    let mut dropped = Vec::new();
    for i in 0..d {
        if dropped_flag[i] {
            continue;
        }
        for j in (i + 1)..d {
            if !dropped_flag[j] && c.r[i][j].abs() >= threshold {
                dropped_flag[j] = true;
                dropped.push(DroppedFeature {
                    name: c.names[j].clone(),
                    partner: c.names[i].clone(),
                    r: c.r[i][j],
                });
            }
        }
    }
    let kept = (0..d)
        .filter(|&j| !dropped_flag[j])
        .map(|j| c.names[j].clone())
        .collect();
    Ok(FeatureSelection {
        kept,
        dropped,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::Target;
    use proptest::prelude::*;

    fn matrix(cols: &[&[f64]]) -> FeatureMatrix {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        FeatureMatrix::unnamed(&rows).unwrap()
    }

    fn corr(r: Vec<Vec<f64>>) -> CorrelationMatrix {
        CorrelationMatrix {
            names: (0..r.len()).map(|j| format!("f{j}")).collect(),
            r,
            degenerate: vec![],
        }
    }

    #[test]
    fn ten_values_five_bins() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let h = histogram("v", &v, 5).unwrap();
        assert_eq!(h.counts, vec![2, 2, 2, 2, 2]);
        assert_eq!(h.bin_edges.len(), 6);
        assert_eq!(h.bin_edges[0], 0.0);
        assert_eq!(h.bin_edges[5], 9.0);
    }

    #[test]
    fn constant_values_single_bin() {
        let h = histogram("v", &[4.0; 7], 5).unwrap();
        assert_eq!(h.counts, vec![7]);
        assert_eq!(h.bin_edges, vec![3.5, 4.5]);
    }

    #[test]
    fn empty_histogram_errors() {
        assert_eq!(histogram("v", &[], 5), Err(EdaError::EmptyInput));
        assert_eq!(histogram("v", &[f64::NAN], 5), Err(EdaError::EmptyInput));
        assert_eq!(histogram("v", &[1.0], 0), Err(EdaError::ZeroBins));
    }

    #[test]
    fn class_counts() {
        let y = LabelVector::new(vec![0, 0, 1], Target::BinaryLabel).unwrap();
        assert_eq!(class_distribution(&y), BTreeMap::from([(0, 2), (1, 1)]));
        let e = LabelVector::new(vec![], Target::BinaryLabel).unwrap();
        assert!(class_distribution(&e).is_empty());
        let s = LabelVector::new(vec![1; 4], Target::BinaryLabel).unwrap();
        assert_eq!(class_distribution(&s), BTreeMap::from([(1, 4)]));
    }

    #[test]
    fn pearson_hand_case() {
        let c = pearson(&matrix(&[&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]])).unwrap();
        // centred x = [-1, 0, 1], y = [-1, 1, 0]: sxy = 1, sxx = syy = 2
        assert!((c.get(0, 1) - 0.5).abs() < 1e-12);
        assert_eq!(c.get(0, 0), 1.0);
    }

    #[test]
    fn pearson_negative_and_degenerate() {
        let c = pearson(&matrix(&[&[1.0, 2.0, 5.0], &[-1.0, -2.0, -5.0], &[3.0, 3.0, 3.0]])).unwrap();
        assert!((c.get(0, 1) + 1.0).abs() < 1e-12);
        assert_eq!(c.degenerate, vec!["x2".to_string()]);
        assert_eq!(c.get(2, 2), 0.0);
        assert_eq!(c.get(0, 2), 0.0);
    }

    #[test]
    fn pearson_needs_two_rows() {
        assert_eq!(pearson(&matrix(&[&[1.0]])), Err(EdaError::TooFewRows(1)));
    }

    #[test]
    fn drop_nothing_when_uncorrelated() {
        let s = drop_correlated(&corr(vec![vec![1.0, 0.0], vec![0.0, 1.0]]), 0.9).unwrap();
        assert_eq!(s.kept.len(), 2);
        assert!(s.dropped.is_empty());
    }

    #[test]
    fn drop_second_of_pair() {
        let s = drop_correlated(&corr(vec![vec![1.0, 0.95], vec![0.95, 1.0]]), 0.9).unwrap();
        assert_eq!(s.kept, vec!["f0"]);
        assert_eq!(s.dropped[0].name, "f1");
        assert_eq!(s.dropped[0].partner, "f0");
    }

    #[test]
    fn three_mutually_correlated_keep_first() {
        let r = vec![
            vec![1.0, -1.0, 1.0],
            vec![-1.0, 1.0, -1.0],
            vec![1.0, -1.0, 1.0],
        ];
        let s = drop_correlated(&corr(r), 0.9).unwrap();
        assert_eq!(s.kept, vec!["f0"]);
        assert_eq!(s.dropped.len(), 2);
    }

    #[test]
    fn threshold_validated() {
        let c = corr(vec![vec![1.0]]);
        assert!(drop_correlated(&c, 0.0).is_err());
        assert!(drop_correlated(&c, 1.5).is_err());
        assert!(drop_correlated(&c, 1.0).is_ok());
    }

    fn small_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..12, 1usize..5).prop_flat_map(|(n, d)| {
            proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, d), n)
        })
    }

    proptest! {
        #[test]
        fn pearson_bounded_and_symmetric(rows in small_matrix()) {
            let c = pearson(&FeatureMatrix::unnamed(&rows).unwrap()).unwrap();
            let d = c.names.len();
            for i in 0..d {
                for j in 0..d {
                    prop_assert!(c.r[i][j].abs() <= 1.0 + 1e-12);
                    prop_assert_eq!(c.r[i][j], c.r[j][i]);
                }
            }
        }

        #[test]
        fn histogram_conserves_count(v in proptest::collection::vec(-1e6f64..1e6, 1..200), bins in 1usize..40) {
            let h = histogram("v", &v, bins).unwrap();
            prop_assert_eq!(h.total(), v.len() as u64);
            prop_assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn kept_pairs_below_threshold(rows in small_matrix(), t in 0.05f64..1.0) {
            let c = pearson(&FeatureMatrix::unnamed(&rows).unwrap()).unwrap();
            let s = drop_correlated(&c, t).unwrap();
            let idx: Vec<usize> = s.kept.iter().map(|k| c.names.iter().position(|n| n == k).unwrap()).collect();
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    prop_assert!(c.r[i][j].abs() < t);
                }
            }
            prop_assert_eq!(s.kept.len() + s.dropped.len(), c.names.len());
            for dr in &s.dropped {
                prop_assert!(s.kept.contains(&dr.partner));
            }
        }
    }
}
