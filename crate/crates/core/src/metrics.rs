//! Confusion matrices, per-class/macro/weighted scores and model comparison
//! tables.
//!
//! Any 0/0 ratio is defined as 0 and raises `zero_division` on the report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("y_true has {truth} labels but y_pred has {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {0} is not in the class list")]
    UnknownLabel(u32),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Rows are true classes, columns predicted classes, both in `classes` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn predicted(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

/// Tally `(true, predicted)` pairs. `classes` is sorted and deduplicated
/// first.
pub fn confusion(y_true: &[u32], y_pred: &[u32], classes: &[u32]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut classes = classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let k = classes.len();
    let pos = |c: u32| classes.binary_search(&c).map_err(|_| MetricsError::UnknownLabel(c));
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[pos(t)?][pos(p)?] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub per_class: Vec<ClassScore>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub zero_division: bool,
}

fn ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        0.0
    } else {
        num / den
    }
}

pub fn score(cm: &ConfusionMatrix) -> Result<Scores> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut zero_division = false;
    let per_class: Vec<ClassScore> = cm
        .classes
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let tp = cm.counts[i][i] as f64;
            let precision = ratio(tp, cm.predicted(i) as f64, &mut zero_division);
            let recall = ratio(tp, cm.support(i) as f64, &mut zero_division);
            let f1 = ratio(2.0 * precision * recall, precision + recall, &mut zero_division);
            ClassScore {
                class,
                precision,
                recall,
                f1,
                support: cm.support(i),
            }
        })
        .collect();
    let k = per_class.len() as f64;
    let n = total as f64;
    let avg = |weight: &dyn Fn(&ClassScore) -> f64, norm: f64| Averages {
        precision: per_class.iter().map(|c| weight(c) * c.precision).sum::<f64>() / norm,
        recall: per_class.iter().map(|c| weight(c) * c.recall).sum::<f64>() / norm,
        f1: per_class.iter().map(|c| weight(c) * c.f1).sum::<f64>() / norm,
    };
    let macro_avg = avg(&|_| 1.0, k);
    let weighted_avg = avg(&|c| c.support as f64, n);
    Ok(Scores {
        accuracy: cm.trace() as f64 / n,
        per_class,
        macro_avg,
        weighted_avg,
        zero_division,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub accuracy: f64,
    pub per_class: Vec<ClassScore>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub zero_division: bool,
    pub confusion: ConfusionMatrix,
}

impl EvaluationReport {
    pub fn from_confusion(model: impl Into<String>, confusion: ConfusionMatrix) -> Result<Self> {
        let s = score(&confusion)?;
        Ok(Self {
            model: model.into(),
            accuracy: s.accuracy,
            per_class: s.per_class,
            macro_avg: s.macro_avg,
            weighted_avg: s.weighted_avg,
            zero_division: s.zero_division,
            confusion,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-class table followed by macro and weighted averages.
    pub fn render_text(&self) -> String {
        let mut out = format!("{}\n", self.model);
        let _ = writeln!(out, "{:>14} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1-score", "support");
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:>14} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                c.class, c.precision, c.recall, c.f1, c.support
            );
        }
        let total = self.confusion.total();
        let _ = writeln!(out, "{:>14} {:>9} {:>9} {:>9.4} {:>9}", "accuracy", "", "", self.accuracy, total);
        for (name, a) in [("macro avg", self.macro_avg), ("weighted avg", self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:>14} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                name, a.precision, a.recall, a.f1, total
            );
        }
        if self.zero_division {
            out.push_str("note: some ratios were 0/0 and are reported as 0\n");
        }
        out
    }
}

pub fn evaluate(model: impl Into<String>, y_true: &[u32], y_pred: &[u32], classes: &[u32]) -> Result<EvaluationReport> {
    EvaluationReport::from_confusion(model, confusion(y_true, y_pred, classes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Weighted-average rows sorted by accuracy (descending), then model name.
pub fn compare(reports: &[EvaluationReport]) -> ComparisonTable {
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            model: r.model.clone(),
            accuracy: r.accuracy,
            precision: r.weighted_avg.precision,
            recall: r.weighted_avg.recall,
            f1: r.weighted_avg.f1,
        })
        .collect();
    compare_rows(rows)
}

impl ComparisonTable {
    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max("Model".len());
        let mut out = format!(
            "{:<width$}  {:>12}  {:>9}  {:>9}  {:>9}\n",
            "Model", "Accuracy", "Precision", "Recall", "F1-score"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.10}  {:>9.4}  {:>9.4}  {:>9.4}",
                r.model, r.accuracy, r.precision, r.recall, r.f1
            );
        }
        out
    }
}

/// Published results for the four compared families on the NetFlow
/// UNSW-NB15 variant, kept as a reference for reproduction runs.
pub fn reference_table() -> ComparisonTable {
    let row = |model: &str, accuracy, precision, recall, f1| ComparisonRow {
        model: model.into(),
        accuracy,
        precision,
        recall,
        f1,
    };
    compare_rows(vec![
        row("Naive Bayes Classifier", 0.930784538419, 0.92, 0.93, 0.92),
        row("AdaBoost Classifier", 0.954889348908, 0.91, 0.95, 0.93),
        row("Random Forest Classifier", 0.954889348908, 0.93, 0.95, 0.93),
        row("K-Nearest Neighbors Classifier", 0.688556607028, 0.90, 0.69, 0.78),
    ])
}

fn compare_rows(mut rows: Vec<ComparisonRow>) -> ComparisonTable {
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.model.cmp(&b.model)));
    ComparisonTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn hand_tally() {
        let cm = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], &[0, 1]).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn perfect_and_empty() {
        let cm = confusion(&[2, 0, 1], &[2, 0, 1], &[0, 1, 2]).unwrap();
        assert_eq!(cm.trace(), 3);
        let s = score(&cm).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert!(s.per_class.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
        assert!(!s.zero_division);
        let empty = confusion(&[], &[], &[0, 1]).unwrap();
        assert_eq!(empty.counts, vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(score(&empty), Err(MetricsError::EmptyMatrix));
    }

    #[test]
    fn two_thirds() {
        // class 1: TP 2, FP 1, FN 1
        let cm = confusion(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0], &[0, 1]).unwrap();
        let c = score(&cm).unwrap().per_class[1];
        assert!(close(c.precision, 2.0 / 3.0));
        assert!(close(c.recall, 2.0 / 3.0));
        assert!(close(c.f1, 2.0 / 3.0));
    }

    #[test]
    fn absent_class_scores_zero() {
        let cm = confusion(&[0, 0], &[0, 0], &[0, 1]).unwrap();
        let s = score(&cm).unwrap();
        assert_eq!(s.per_class[1].precision, 0.0);
        assert_eq!(s.per_class[1].f1, 0.0);
        assert!(s.zero_division);
    }

    #[test]
    fn errors() {
        assert_eq!(
            confusion(&[0], &[], &[0]),
            Err(MetricsError::LengthMismatch { truth: 1, pred: 0 })
        );
        assert_eq!(confusion(&[0], &[3], &[0, 1]), Err(MetricsError::UnknownLabel(3)));
    }

    #[test]
    fn reference_rows() {
        let t = reference_table();
        let nb = t.rows.iter().find(|r| r.model.starts_with("Naive")).unwrap();
        assert_eq!((nb.accuracy, nb.precision, nb.recall, nb.f1), (0.930784538419, 0.92, 0.93, 0.92));
        let knn = t.rows.iter().find(|r| r.model.starts_with("K-Nearest")).unwrap();
        assert_eq!((knn.accuracy, knn.precision, knn.recall, knn.f1), (0.688556607028, 0.90, 0.69, 0.78));
        assert_eq!(t.rows[0].model, "AdaBoost Classifier");
        assert_eq!(t.rows[3].model, "K-Nearest Neighbors Classifier");
    }

    #[test]
    fn comparison_sorted_and_rendered() {
        let a = evaluate("b", &[0, 1, 1], &[0, 1, 0], &[0, 1]).unwrap();
        let b = evaluate("a", &[0, 1, 1], &[0, 1, 0], &[0, 1]).unwrap();
        let c = evaluate("z", &[0, 1, 1], &[0, 1, 1], &[0, 1]).unwrap();
        let t = compare(&[a.clone(), b, c]);
        let names: Vec<_> = t.rows.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["z", "a", "b"]);
        let text = t.render_text();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(compare(&[a]).rows.len(), 1);
    }

    fn pairs() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        (1usize..50).prop_flat_map(|n| (prop::collection::vec(0u32..4, n), prop::collection::vec(0u32..4, n)))
    }

    proptest! {
        #[test]
        fn weighted_recall_is_accuracy((t, p) in pairs()) {
            let s = score(&confusion(&t, &p, &[0, 1, 2, 3]).unwrap()).unwrap();
            prop_assert!(close(s.weighted_avg.recall, s.accuracy));
            for c in &s.per_class {
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                if c.precision > 0.0 && c.recall > 0.0 {
                    let h = 2.0 * c.precision * c.recall / (c.precision + c.recall);
                    prop_assert!(close(c.f1, h));
                    prop_assert!(c.f1 >= c.precision.min(c.recall) - 1e-12);
                    prop_assert!(c.f1 <= c.precision.max(c.recall) + 1e-12);
                }
            }
        }

        #[test]
        fn joint_permutation_invariant((t, p) in pairs(), rot in 0usize..50) {
            let r = rot % t.len();
            let mut t2 = t.clone();
            let mut p2 = p.clone();
            t2.rotate_left(r);
            p2.rotate_left(r);
            let a = score(&confusion(&t, &p, &[0, 1, 2, 3]).unwrap()).unwrap();
            let b = score(&confusion(&t2, &p2, &[0, 1, 2, 3]).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
