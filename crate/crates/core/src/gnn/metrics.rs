//! Per-label classification metrics with explicit undefined-value flags.
//!
//! AUC is the Mann-Whitney statistic computed from average ranks, so tied
//! scores count one half. Brute-force pair counting lives in the test suites
//! as the independent oracle.

use serde::{Deserialize, Serialize};

use super::model::{GnnModel, Mode};
use super::tensor::Real;
use super::GnnError;
use crate::formula::FormulaGraph;
use crate::kg::NUM_LABELS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub accuracy: f64,
    pub specificity: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    /// Names of metrics that were undefined on this label and reported as
    /// their fallback value.
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub labels: Vec<LabelMetrics>,
}

impl MetricsReport {
    pub fn mean_auc(&self) -> f64 {
        self.labels.iter().map(|l| l.auc).sum::<f64>() / self.labels.len() as f64
    }
}

/// Rank-based Mann-Whitney AUC; `None` when one class is absent.
pub fn auc_rank(scores: &[(f64, bool)]) -> Option<f64> {
    let n_pos = scores.iter().filter(|(_, y)| *y).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.partial_cmp(&scores[b].0).unwrap());
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        // Average rank for the tie group, 1-based.
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = scores
        .iter()
        .zip(&ranks)
        .filter(|((_, y), _)| *y)
        .map(|(_, r)| *r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Metrics from (per-label score, per-label truth) rows. Prediction rule:
/// score >= threshold.
pub fn metrics_from_scores(
    rows: &[([f64; NUM_LABELS], [bool; NUM_LABELS])],
    threshold: f64,
) -> MetricsReport {
    let mut labels = Vec::with_capacity(NUM_LABELS);
    for label in 0..NUM_LABELS {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        let mut tn = 0usize;
        let mut auc_input = Vec::with_capacity(rows.len());
        for (scores, truth) in rows {
            let predicted = scores[label] >= threshold;
            match (predicted, truth[label]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
            auc_input.push((scores[label], truth[label]));
        }
        let mut undefined = Vec::new();
        let mut ratio = |num: usize, den: usize, name: &str| -> f64 {
            if den == 0 {
                undefined.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp, "precision");
        let recall = ratio(tp, tp + fn_, "recall");
        let specificity = ratio(tn, tn + fp, "specificity");
        let accuracy = ratio(tp + tn, rows.len(), "accuracy");
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f1".to_string());
            0.0
        };
        let auc = match auc_rank(&auc_input) {
            Some(a) => a,
            None => {
                undefined.push("auc".to_string());
                0.5
            }
        };
        labels.push(LabelMetrics {
            precision,
            recall,
            f1,
            auc,
            accuracy,
            specificity,
            tp,
            fp,
            fn_,
            tn,
            undefined,
        });
    }
    MetricsReport { threshold, labels }
}

/// Scores every graph in eval mode and folds the results into a report.
pub fn evaluate<F: Real>(
    model: &GnnModel<F>,
    split: &[FormulaGraph],
    threshold: f64,
) -> Result<MetricsReport, GnnError> {
    let rows = score_split(model, split)?;
    Ok(metrics_from_scores(&rows, threshold))
}

pub fn score_split<F: Real>(
    model: &GnnModel<F>,
    split: &[FormulaGraph],
) -> Result<Vec<([f64; NUM_LABELS], [bool; NUM_LABELS])>, GnnError> {
    let mut rows = Vec::with_capacity(split.len());
    for g in split {
        let labels = g
            .labels
            .ok_or_else(|| GnnError::MissingLabels(g.formula_id.0.clone()))?;
        let fwd = model.forward(g, Mode::Eval)?;
        rows.push((fwd.scores(), labels));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n^2) pair-counting oracle with half-credit ties.
    pub fn auc_pair_oracle(scores: &[(f64, bool)]) -> Option<f64> {
        let pos: Vec<f64> = scores.iter().filter(|(_, y)| *y).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores.iter().filter(|(_, y)| !*y).map(|(s, _)| *s).collect();
        if pos.is_empty() || neg.is_empty() {
            return None;
        }
        let mut wins = 0.0f64;
        for p in &pos {
            for n in &neg {
                if p > n {
                    wins += 1.0;
                } else if p == n {
                    wins += 0.5;
                }
            }
        }
        Some(wins / (pos.len() * neg.len()) as f64)
    }

    #[test]
    fn auc_separable_is_one() {
        let scores = vec![(0.9, true), (0.1, false)];
        assert_eq!(auc_rank(&scores), Some(1.0));
    }

    #[test]
    fn auc_known_075() {
        // pos {0.8, 0.3}, neg {0.5, 0.2}: 3 of 4 pairs won.
        let scores = vec![(0.8, true), (0.3, true), (0.5, false), (0.2, false)];
        assert_eq!(auc_rank(&scores), Some(0.75));
        assert_eq!(auc_pair_oracle(&scores), Some(0.75));
    }

    #[test]
    fn auc_matches_oracle_with_ties() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let n = rng.gen_range(2..40);
            let scores: Vec<(f64, bool)> = (0..n)
                .map(|_| {
                    // Quantized scores force plenty of ties.
                    let s = (rng.gen::<f64>() * 5.0).round() / 5.0;
                    (s, rng.gen::<bool>())
                })
                .collect();
            assert_eq!(auc_rank(&scores), auc_pair_oracle(&scores));
        }
    }

    #[test]
    fn confusion_hand_example() {
        // tp=3, fp=1, fn=2, tn=4 on label 0.
        let mut rows = Vec::new();
        for _ in 0..3 {
            rows.push(([0.9, 0.0, 0.0, 0.0, 0.0], [true, false, false, false, false]));
        }
        rows.push(([0.9, 0.0, 0.0, 0.0, 0.0], [false, false, false, false, false]));
        for _ in 0..2 {
            rows.push(([0.1, 0.0, 0.0, 0.0, 0.0], [true, false, false, false, false]));
        }
        for _ in 0..4 {
            rows.push(([0.1, 0.0, 0.0, 0.0, 0.0], [false, false, false, false, false]));
        }
        let report = metrics_from_scores(&rows, 0.5);
        let m = &report.labels[0];
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-4);
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.specificity - 0.8).abs() < 1e-12);
        // F1 is the harmonic mean of its own precision/recall entries.
        let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert!((m.f1 - harmonic).abs() <= 1e-12);
    }

    #[test]
    fn undefined_metrics_flagged() {
        let rows = vec![([0.1, 0.0, 0.0, 0.0, 0.0], [true, false, false, false, false])];
        let report = metrics_from_scores(&rows, 0.5);
        let m = &report.labels[0];
        assert_eq!(m.precision, 0.0);
        assert!(m.undefined.iter().any(|u| u == "precision"));
        assert!(m.undefined.iter().any(|u| u == "auc"));
        assert_eq!(m.auc, 0.5);
    }
}
