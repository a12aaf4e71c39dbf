//! One-vs-all precision, recall and F-score, macro-averaged over every class
//! except the designated negative (majority) class.

use std::fmt::Write as _;

use serde::Serialize;

use crate::data::{ClassId, LabelDict};
use crate::error::{Error, Result};
use crate::forest::ConfusionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

impl Scores {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let fscore = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Scores {
            precision,
            recall,
            fscore,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores {
    pub class: ClassId,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub negative_class: ClassId,
    /// Every class except the negative one, ascending.
    pub per_class: Vec<ClassScores>,
    pub macro_avg: Scores,
}

pub fn confusion_from_predictions(truth: &[ClassId], predicted: &[ClassId], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no predictions".to_string()));
    }
    let mut m = ConfusionMatrix::new(k);
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(Error::InvalidArgument(format!(
                "class id outside 0..{k}"
            )));
        }
        m.add(t, p);
    }
    Ok(m)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-all scores for every class but `negative_class`, plus their
/// unweighted means. Undefined ratios count as 0.
pub fn evaluate(m: &ConfusionMatrix, negative_class: ClassId) -> Result<EvalReport> {
    let k = m.num_classes();
    if k < 2 || negative_class >= k {
        return Err(Error::InvalidArgument(format!(
            "need K >= 2 and a negative class below K (K = {k}, negative = {negative_class})"
        )));
    }
    let per_class: Vec<ClassScores> = (0..k)
        .filter(|&y| y != negative_class)
        .map(|y| {
            let tp = m.get(y, y);
            ClassScores {
                class: y,
                scores: Scores::from_pr(ratio(tp, m.column_total(y)), ratio(tp, m.row_total(y))),
            }
        })
        .collect();
    let n = per_class.len() as f64;
    let mean = |f: fn(&Scores) -> f64| per_class.iter().map(|c| f(&c.scores)).sum::<f64>() / n;
    let macro_avg = Scores {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        fscore: mean(|s| s.fscore),
    };
    Ok(EvalReport {
        negative_class,
        per_class,
        macro_avg,
    })
}

impl EvalReport {
    /// One line per class, then a macro line:
    /// `class=<name> precision=<p> recall=<r> fscore=<f>`.
    pub fn to_text(&self, dict: &LabelDict) -> String {
        let mut out = String::new();
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "class={} precision={:.6} recall={:.6} fscore={:.6}",
                dict.name(c.class),
                c.scores.precision,
                c.scores.recall,
                c.scores.fscore
            );
        }
        let _ = writeln!(
            out,
            "macro precision={:.6} recall={:.6} fscore={:.6}",
            self.macro_avg.precision, self.macro_avg.recall, self.macro_avg.fscore
        );
        out
    }

    pub fn to_json(&self, dict: &LabelDict, strategy: &str) -> serde_json::Value {
        let per_class: Vec<_> = self
            .per_class
            .iter()
            .map(|c| {
                serde_json::json!({
                    "class": c.class,
                    "label": dict.name(c.class),
                    "precision": c.scores.precision,
                    "recall": c.scores.recall,
                    "fscore": c.scores.fscore,
                })
            })
            .collect();
        serde_json::json!({
            "strategy": strategy,
            "negative_class": dict.name(self.negative_class),
            "per_class": per_class,
            "macro": self.macro_avg,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn confusion_construction() {
        let m = confusion_from_predictions(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(m, matrix(&[&[1, 0], &[0, 1]]));
        let m = confusion_from_predictions(&[0], &[1], 2).unwrap();
        assert_eq!(m.get(0, 1), 1);
        let m = confusion_from_predictions(&[1; 100], &[1; 100], 2).unwrap();
        assert_eq!(m.get(1, 1), 100);
        assert_eq!(m.total(), 100);
        assert!(confusion_from_predictions(&[0, 1], &[0], 2).is_err());
        assert!(confusion_from_predictions(&[], &[], 2).is_err());
        assert!(confusion_from_predictions(&[2], &[0], 2).is_err());
    }

    #[test]
    fn precision_from_tp_fp() {
        // class 1: TP 6, FP 2 (from class 0), FN 0
        let r = evaluate(&matrix(&[&[5, 2], &[0, 6]]), 0).unwrap();
        assert_eq!(r.per_class[0].scores.precision, 0.75);
        assert_eq!(r.per_class[0].scores.recall, 1.0);
    }

    #[test]
    fn fscore_harmonic_mean() {
        let s = Scores::from_pr(0.941, 0.713);
        assert!((s.fscore - 0.811).abs() < 1e-3, "{}", s.fscore);
        assert_eq!(Scores::from_pr(0.0, 0.0).fscore, 0.0);
    }

    #[test]
    fn perfect_diagonal() {
        let r = evaluate(&matrix(&[&[4, 0, 0], &[0, 2, 0], &[0, 0, 9]]), 0).unwrap();
        assert_eq!(r.per_class.len(), 2);
        for c in &r.per_class {
            assert_eq!(c.scores, Scores::from_pr(1.0, 1.0));
        }
        assert_eq!(r.macro_avg.fscore, 1.0);
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let r = evaluate(&matrix(&[&[5, 0, 0], &[3, 0, 0], &[0, 0, 2]]), 0).unwrap();
        assert_eq!(r.per_class[0].scores, Scores::from_pr(0.0, 0.0));
        assert_eq!(r.macro_avg.fscore, 0.5);
    }

    #[test]
    fn binary_macro_equals_positive_class() {
        let r = evaluate(&matrix(&[&[50, 3], &[4, 9]]), 0).unwrap();
        assert_eq!(r.macro_avg, r.per_class[0].scores);
    }

    #[test]
    fn bad_arguments() {
        assert!(evaluate(&ConfusionMatrix::new(1), 0).is_err());
        assert!(evaluate(&ConfusionMatrix::new(3), 3).is_err());
    }

    #[test]
    fn text_and_json_reports() {
        let dict = LabelDict::from_labels(&["1", "2", "3"]).unwrap();
        let r = evaluate(&matrix(&[&[5, 2, 0], &[0, 6, 0], &[1, 0, 3]]), 0).unwrap();
        let text = r.to_text(&dict);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("class=2 precision=0.750000 recall=1.000000"));
        assert!(lines[2].starts_with("macro "));
        let json = r.to_json(&dict, "mv");
        assert_eq!(json["strategy"], "mv");
        assert_eq!(json["negative_class"], "1");
        assert_eq!(json["per_class"][1]["label"], "3");
        assert_eq!(json["macro"]["recall"], r.macro_avg.recall);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metric_bounds(rows in prop::collection::vec(prop::collection::vec(0u64..20, 4), 4)) {
                let m = ConfusionMatrix::from_rows(&rows).unwrap();
                let r = evaluate(&m, 0).unwrap();
                for c in r.per_class.iter().map(|c| c.scores).chain([r.macro_avg]) {
                    for v in [c.precision, c.recall, c.fscore] {
                        prop_assert!((0.0..=1.0).contains(&v));
                    }
                }
                for c in &r.per_class {
                    let s = c.scores;
                    prop_assert!(s.fscore >= s.precision.min(s.recall) - 1e-12);
                    prop_assert!(s.fscore <= s.precision.max(s.recall) + 1e-12);
                }
            }

            #[test]
            fn permutation_invariance(rows in prop::collection::vec(prop::collection::vec(0u64..20, 3), 3), neg in 0usize..3, rot in 1usize..3) {
                let m = ConfusionMatrix::from_rows(&rows).unwrap();
                let perm = |i: usize| (i + rot) % 3;
                let mut permuted = vec![vec![0u64; 3]; 3];
                for (i, row) in rows.iter().enumerate() {
                    for (j, &c) in row.iter().enumerate() {
                        permuted[perm(i)][perm(j)] = c;
                    }
                }
                let a = evaluate(&m, neg).unwrap();
                let b = evaluate(&ConfusionMatrix::from_rows(&permuted).unwrap(), perm(neg)).unwrap();
                prop_assert!((a.macro_avg.fscore - b.macro_avg.fscore).abs() < 1e-12);
                prop_assert!((a.macro_avg.precision - b.macro_avg.precision).abs() < 1e-12);
                prop_assert!((a.macro_avg.recall - b.macro_avg.recall).abs() < 1e-12);
            }
        }
    }
}
