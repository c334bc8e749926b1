//! AUROC, mean TPR (balanced accuracy) and the per-method comparison table.

use std::fmt::Write as _;

use crate::datagen::{LabelKind, TraversalSample};
use crate::encoder_net::ModelState;
use crate::error::{Error, Result};
use crate::learners::{score, EvalThreshold, Method};

fn check(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "need both classes, got {} positives and {} negatives",
            pos.len(),
            neg.len()
        )));
    }
    Ok(())
}

/// `P(pos > neg) + 0.5·P(pos = neg)` via the rank-sum statistic with
/// average ranks for ties.
pub fn auroc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check(pos, neg)?;
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1..=j share their average
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Mean of the positive recall (`score ≥ t`) and negative recall (`score < t`).
pub fn mean_tpr(pos: &[f64], neg: &[f64], threshold: EvalThreshold) -> Result<f64> {
    check(pos, neg)?;
    let tp = pos.iter().filter(|&&s| threshold.classify(s)).count() as f64 / pos.len() as f64;
    let tn = neg.iter().filter(|&&s| !threshold.classify(s)).count() as f64 / neg.len() as f64;
    Ok((tp + tn) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Method name, optionally with a variant suffix.
    pub method: String,
    pub tpr_mean: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub rows: Vec<ReportRow>,
}

/// Scores of the labeled eval samples, split by class; unlabeled samples
/// are skipped.
pub fn labeled_scores(
    model: &ModelState,
    eval: &[TraversalSample],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut p, mut n) = (Vec::new(), Vec::new());
    for s in eval {
        match s.label {
            LabelKind::Positive => p.push(score(model, s)?),
            LabelKind::NegativeEvalOnly => n.push(score(model, s)?),
            LabelKind::Unlabeled => {}
        }
    }
    Ok((p, n))
}

/// One row per model, in the given order.
pub fn build_report(
    dataset: &str,
    models: &[(String, &ModelState)],
    eval: &[TraversalSample],
    threshold: EvalThreshold,
) -> Result<EvalReport> {
    let n_pos = eval
        .iter()
        .filter(|s| s.label == LabelKind::Positive)
        .count();
    let n_neg = eval
        .iter()
        .filter(|s| s.label == LabelKind::NegativeEvalOnly)
        .count();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "eval split has {n_pos} positives and {n_neg} negatives"
        )));
    }
    let rows = models
        .iter()
        .map(|(name, m)| {
            let (p, n) = labeled_scores(m, eval)?;
            Ok(ReportRow {
                method: name.clone(),
                tpr_mean: mean_tpr(&p, &n, threshold)?,
                auroc: auroc(&p, &n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        threshold: threshold.0,
        n_pos,
        n_neg,
        rows,
    })
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn row_for(&self, method: Method) -> Option<&ReportRow> {
        self.row(method.name())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,TPR,AUROC\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.6}", r.method, r.tpr_mean, r.auroc);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let w = self
            .rows
            .iter()
            .map(|r| r.method.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset: {}  threshold: {}  positives: {}  negatives: {}",
            self.dataset, self.threshold, self.n_pos, self.n_neg
        );
        let _ = writeln!(s, "{:<w$}  {:>8}  {:>8}", "method", "TPR", "AUROC");
        for r in &self.rows {
            let _ = writeln!(s, "{:<w$}  {:>8.4}  {:>8.4}", r.method, r.tpr_mean, r.auroc);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(pos: &[f64], neg: &[f64]) -> f64 {
        let mut acc = 0.0;
        for p in pos {
            for n in neg {
                if p > n {
                    acc += 1.0;
                } else if p == n {
                    acc += 0.5;
                }
            }
        }
        acc / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.6], &[0.6]).unwrap(), 0.5);
        assert!(matches!(auroc(&[], &[0.1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn mean_tpr_examples() {
        let t = EvalThreshold::default();
        assert_eq!(mean_tpr(&[1.0; 10], &[1.0; 10], t).unwrap(), 0.5);
        assert_eq!(mean_tpr(&[0.9, 0.7], &[0.1, 0.2], t).unwrap(), 1.0);
        assert_eq!(mean_tpr(&[0.9, 0.4], &[0.3, 0.6], t).unwrap(), 0.5);
        assert!(mean_tpr(&[0.9], &[], t).is_err());
    }

    #[test]
    fn csv_and_table_format() {
        let r = EvalReport {
            dataset: "toy".into(),
            threshold: 0.5,
            n_pos: 1,
            n_neg: 1,
            rows: vec![ReportRow {
                method: "ours".into(),
                tpr_mean: 1.0,
                auroc: 1.0,
            }],
        };
        assert_eq!(r.to_csv(), "method,TPR,AUROC\nours,1.000000,1.000000\n");
        assert!(r.to_table().contains("ours"));
    }

    proptest! {
        #[test]
        fn rank_sum_matches_brute_force(
            pos in prop::collection::vec(0u8..20, 1..60),
            neg in prop::collection::vec(0u8..20, 1..60),
        ) {
            // coarse values force plenty of ties
            let p: Vec<f64> = pos.iter().map(|&v| v as f64 / 20.0).collect();
            let n: Vec<f64> = neg.iter().map(|&v| v as f64 / 20.0).collect();
            prop_assert!((auroc(&p, &n).unwrap() - brute(&p, &n)).abs() <= 1e-12);
        }

        #[test]
        fn auroc_monotone_invariant(
            pos in prop::collection::vec(-5.0f64..5.0, 1..40),
            neg in prop::collection::vec(-5.0f64..5.0, 1..40),
        ) {
            let a = auroc(&pos, &neg).unwrap();
            let f = |v: &f64| (v * 0.7).exp() + 3.0;
            let b = auroc(&pos.iter().map(f).collect::<Vec<_>>(), &neg.iter().map(f).collect::<Vec<_>>()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn auroc_swap_complements(
            pos in prop::collection::hash_set(0u32..10_000, 1..40),
            neg in prop::collection::hash_set(10_000u32..20_000, 1..40),
        ) {
            // disjoint integer sets keep the inputs tie-free; shuffle by hashing
            let p: Vec<f64> = pos.iter().map(|&v| ((v * 7919) % 20_000) as f64).collect();
            let n: Vec<f64> = neg.iter().map(|&v| ((v * 7919) % 20_000) as f64 + 0.5).collect();
            let s = auroc(&p, &n).unwrap() + auroc(&n, &p).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mean_tpr_ignores_imbalance(
            pos in prop::collection::vec(0.0f64..1.0, 1..20),
            neg in prop::collection::vec(0.0f64..1.0, 1..20),
            reps in 1usize..5,
        ) {
            let t = EvalThreshold::default();
            let big: Vec<f64> = pos.iter().cycle().take(pos.len() * reps).copied().collect();
            prop_assert!((mean_tpr(&pos, &neg, t).unwrap() - mean_tpr(&big, &neg, t).unwrap()).abs() < 1e-12);
        }
    }
}
