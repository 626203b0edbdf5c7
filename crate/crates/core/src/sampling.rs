//! Stratified train/test splitting and SMOTE oversampling.
//!
//! Both operations draw from [`SeededRng`](crate::rng::SeededRng), so the
//! same inputs and seed always give bit-identical results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowdata::{FeatureMatrix, LabelVector};
use crate::rng::SeededRng;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_SMOTE_K: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("cannot split an empty label vector")]
    EmptyLabels,
    #[error("test fraction must lie in [0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("SMOTE needs k >= 1")]
    InvalidK,
    #[error("matrix has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("cannot oversample an empty training set")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub seed: u64,
    pub test_fraction: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn rows_by_class(y: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    by_class
}

/// Per class (ascending code), shuffle that class's row indices and send the
/// first `round(count * test_fraction)` to the test side. Both index lists
/// come back sorted ascending.
pub fn stratified_split(
    y: &LabelVector,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, SamplingError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(SamplingError::InvalidFraction(test_fraction));
    }
    if y.is_empty() {
        return Err(SamplingError::EmptyLabels);
    }
    let mut rng = SeededRng::new(seed);
    let mut train = Vec::with_capacity(y.len());
    let mut test = Vec::new();
    for (_, mut rows) in rows_by_class(y.values()) {
        rng.shuffle(&mut rows);
        let n_test = ((rows.len() as f64) * test_fraction).round() as usize;
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        seed,
        test_fraction,
        train,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampledSet {
    pub x: FeatureMatrix,
    pub y: LabelVector,
    /// `(base, neighbor)` input-row indices for each appended synthetic row.
    pub synthetic_from: Vec<(usize, usize)>,
    pub seed: u64,
    /// Set when the input had a single class and nothing was generated.
    pub single_class: bool,
}

impl ResampledSet {
    pub fn synthetic_count(&self) -> usize {
        self.synthetic_from.len()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// The `k` rows of `members` nearest to `members[base]`, excluding itself,
/// by Euclidean distance then lower row index.
fn nearest_members(x: &FeatureMatrix, members: &[usize], base: usize, k: usize) -> Vec<usize> {
    let origin = x.row(members[base]);
    let mut cand: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(pos, _)| pos != base)
        .map(|(_, &row)| (squared_distance(origin, x.row(row)), row))
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, by_dist);
        cand.truncate(k);
    }
    cand.sort_by(by_dist);
    cand.into_iter().map(|(_, row)| row).collect()
}

/// Oversample every non-majority class up to the majority count.
///
/// For each synthetic row: draw a base row uniformly from the class, draw one
/// of its `k` nearest same-class neighbours uniformly, draw `u` in `[0, 1)`
/// and emit `base + u * (neighbor - base)`. `k` is clipped to
/// `class_size - 1`; a singleton class is copied verbatim. Classes are
/// processed in ascending code order and the original rows stay as a prefix.
pub fn smote(
    x: &FeatureMatrix,
    y: &LabelVector,
    k: usize,
    seed: u64,
) -> Result<ResampledSet, SamplingError> {
    if k == 0 {
        return Err(SamplingError::InvalidK);
    }
    if x.n_rows() != y.len() {
        return Err(SamplingError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(SamplingError::EmptyInput);
    }
    let by_class = rows_by_class(y.values());
    if by_class.len() < 2 {
        return Ok(ResampledSet {
            x: x.clone(),
            y: y.clone(),
            synthetic_from: Vec::new(),
            seed,
            single_class: true,
        });
    }
    let majority = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = SeededRng::new(seed);
    let mut new_rows = Vec::new();
    let mut new_labels = Vec::new();
    let mut synthetic_from = Vec::new();

    for (&class, members) in &by_class {
        let needed = majority - members.len();
        if needed == 0 {
            continue;
        }
        let k_eff = k.min(members.len() - 1);
        // neighbour lists are computed lazily, once per drawn base
        let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; members.len()];
        for _ in 0..needed {
            let base_pos = rng.below_usize(members.len());
            let base = members[base_pos];
            if k_eff == 0 {
                new_rows.push(x.row(base).to_vec());
                synthetic_from.push((base, base));
                new_labels.push(class);
                continue;
            }
            let list = neighbours[base_pos]
                .get_or_insert_with(|| nearest_members(x, members, base_pos, k_eff));
            let neighbour = list[rng.below_usize(list.len())];
            let u = rng.unit();
            let row = x
                .row(base)
                .iter()
                .zip(x.row(neighbour))
                .map(|(&a, &b)| (a + u * (b - a)).clamp(a.min(b), a.max(b)))
                .collect();
            new_rows.push(row);
            synthetic_from.push((base, neighbour));
            new_labels.push(class);
        }
    }
    let x_out = x
        .append_rows(&new_rows)
        .expect("interpolated rows are finite and correctly sized");
    Ok(ResampledSet {
        x: x_out,
        y: y.extended(&new_labels),
        synthetic_from,
        seed,
        single_class: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::Target;
    use proptest::prelude::*;

    fn labels(v: Vec<u32>) -> LabelVector {
        LabelVector::new(v, Target::AttackCategory).unwrap()
    }

    fn class_counts(y: &[u32]) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for &c in y {
            *m.entry(c).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn ninety_ten_split() {
        let mut v = vec![0u32; 90];
        v.extend(vec![1u32; 10]);
        let s = stratified_split(&labels(v.clone()), 0.2, 7).unwrap();
        assert_eq!(s.test.len(), 20);
        let test_labels: Vec<u32> = s.test.iter().map(|&i| v[i]).collect();
        assert_eq!(class_counts(&test_labels), BTreeMap::from([(0, 18), (1, 2)]));
    }

    #[test]
    fn zero_fraction_keeps_everything_for_training() {
        let s = stratified_split(&labels(vec![0, 1, 1, 0]), 0.0, 1).unwrap();
        assert!(s.test.is_empty());
        assert_eq!(s.train, vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_by_two_half() {
        let v = vec![0, 0, 1, 1];
        let s = stratified_split(&labels(v.clone()), 0.5, 3).unwrap();
        let test_labels: Vec<u32> = s.test.iter().map(|&i| v[i]).collect();
        assert_eq!(class_counts(&test_labels), BTreeMap::from([(0, 1), (1, 1)]));
    }

    #[test]
    fn split_errors() {
        assert_eq!(stratified_split(&labels(vec![]), 0.2, 1), Err(SamplingError::EmptyLabels));
        assert_eq!(
            stratified_split(&labels(vec![0]), 1.0, 1),
            Err(SamplingError::InvalidFraction(1.0))
        );
    }

    #[test]
    fn split_json_round_trip() {
        let s = stratified_split(&labels(vec![0, 1, 0, 1, 1]), 0.4, 9).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"seed\":9"));
        assert_eq!(serde_json::from_str::<SplitIndices>(&text).unwrap(), s);
    }

    #[test]
    fn balanced_input_untouched() {
        let x = FeatureMatrix::unnamed(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = labels(vec![0, 1, 0, 1]);
        let r = smote(&x, &y, 5, 1).unwrap();
        assert_eq!(r.x, x);
        assert_eq!(r.y, y);
        assert_eq!(r.synthetic_count(), 0);
    }

    #[test]
    fn two_point_minority_on_segment() {
        let x = FeatureMatrix::unnamed(&[
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 0.0],
            vec![3.0, 1.0],
            vec![10.0, 10.0],
            vec![12.0, 14.0],
        ])
        .unwrap();
        let y = labels(vec![0, 0, 0, 0, 1, 1]);
        let r = smote(&x, &y, 5, 42).unwrap();
        assert_eq!(r.synthetic_count(), 2);
        for i in 6..8 {
            let p = r.x.row(i);
            let t = (p[0] - 10.0) / 2.0;
            assert!((0.0..=1.0).contains(&t));
            assert!((p[1] - (10.0 + 4.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_minority_duplicated() {
        let x = FeatureMatrix::unnamed(&[vec![0.0], vec![1.0], vec![2.0], vec![7.5]]).unwrap();
        let y = labels(vec![0, 0, 0, 1]);
        let r = smote(&x, &y, 5, 5).unwrap();
        assert_eq!(r.synthetic_count(), 2);
        assert_eq!(r.x.row(4), &[7.5]);
        assert_eq!(r.x.row(5), &[7.5]);
        assert_eq!(r.synthetic_from, vec![(3, 3), (3, 3)]);
    }

    #[test]
    fn single_class_flagged() {
        let x = FeatureMatrix::unnamed(&[vec![0.0], vec![1.0]]).unwrap();
        let r = smote(&x, &labels(vec![1, 1]), 5, 5).unwrap();
        assert!(r.single_class);
        assert_eq!(r.x, x);
    }

    #[test]
    fn smote_argument_errors() {
        let x = FeatureMatrix::unnamed(&[vec![0.0]]).unwrap();
        assert_eq!(smote(&x, &labels(vec![0]), 0, 1), Err(SamplingError::InvalidK));
        assert!(matches!(
            smote(&x, &labels(vec![0, 1]), 1, 1),
            Err(SamplingError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn neighbour_ties_prefer_lower_index() {
        let x = FeatureMatrix::unnamed(&[vec![0.0], vec![1.0], vec![-1.0], vec![5.0]]).unwrap();
        assert_eq!(nearest_members(&x, &[0, 1, 2, 3], 0, 2), vec![1, 2]);
        assert_eq!(nearest_members(&x, &[0, 1, 2, 3], 3, 1), vec![1]);
    }

    proptest! {
        #[test]
        fn split_partitions(v in proptest::collection::vec(0u32..4, 1..120), seed in any::<u64>()) {
            let y = labels(v.clone());
            let s = stratified_split(&y, 0.2, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..v.len()).collect::<Vec<_>>());
            let total = class_counts(&v);
            let tested = class_counts(&s.test.iter().map(|&i| v[i]).collect::<Vec<_>>());
            for (c, n) in total {
                let got = *tested.get(&c).unwrap_or(&0) as f64;
                prop_assert!((got - (n as f64 * 0.2).round()).abs() <= 1.0);
            }
            prop_assert_eq!(stratified_split(&y, 0.2, seed).unwrap(), s);
        }

        #[test]
        fn smote_balances_and_interpolates(
            rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 2), 3..40),
            seed in any::<u64>(),
            k in 1usize..7,
        ) {
            let n = rows.len();
            let v: Vec<u32> = (0..n).map(|i| u32::from(i % 4 == 0)).collect();
            let x = FeatureMatrix::unnamed(&rows).unwrap();
            let y = labels(v);
            let r = smote(&x, &y, k, seed).unwrap();
            let counts = class_counts(r.y.values());
            let first = *counts.values().next().unwrap();
            prop_assert!(counts.values().all(|&c| c == first));
            for i in 0..n {
                prop_assert_eq!(r.x.row(i), x.row(i));
            }
            for (s, &(b, nb)) in r.synthetic_from.iter().enumerate() {
                let p = r.x.row(n + s);
                for j in 0..2 {
                    let (lo, hi) = (x.get(b, j).min(x.get(nb, j)), x.get(b, j).max(x.get(nb, j)));
                    prop_assert!(p[j] >= lo - 1e-12 && p[j] <= hi + 1e-12);
                }
                prop_assert_eq!(y.values()[b], y.values()[nb]);
            }
            prop_assert_eq!(smote(&x, &y, k, seed).unwrap(), r);
        }
    }
}
