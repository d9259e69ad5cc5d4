//! Error-detection metrics: per-class confusion metrics, ROC AUC, the
//! parser-dependent baseline scores, and 5-fold by-database cross-validation
//! with accuracy-maximizing threshold selection.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DROPOUT_PASSES;
use crate::error::MetricsError;

/// One scored (question, predicted SQL) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub question_id: String,
    pub db_id: String,
    pub score: f64,
    /// true = the prediction is correct (positive class).
    pub label: bool,
    pub beam_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion metrics for both classes plus accuracy and (when computed) AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub threshold: f64,
    /// Metrics that were 0/0 and reported as 0.
    pub degenerate: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, degenerate: &mut Vec<String>) -> f64 {
    if den == 0 {
        degenerate.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Thresholded confusion metrics; a pair is predicted correct iff
/// `score >= threshold`. Positive class = correct prediction.
pub fn confusion_metrics(
    examples: &[ScoredExample],
    threshold: f64,
) -> Result<MetricsReport, MetricsError> {
    if examples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for ex in examples {
        let predicted_positive = ex.score >= threshold;
        match (predicted_positive, ex.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let mut degenerate = Vec::new();
    let pos_p = ratio(tp, tp + fp, "positive_precision", &mut degenerate);
    let pos_r = ratio(tp, tp + fn_, "positive_recall", &mut degenerate);
    let neg_p = ratio(tn, tn + fn_, "negative_precision", &mut degenerate);
    let neg_r = ratio(tn, tn + fp, "negative_recall", &mut degenerate);
    let f1 = |p: f64, r: f64, name: &str, degenerate: &mut Vec<String>| {
        if p + r == 0.0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    };
    let pos_f1 = f1(pos_p, pos_r, "positive_f1", &mut degenerate);
    let neg_f1 = f1(neg_p, neg_r, "negative_f1", &mut degenerate);
    Ok(MetricsReport {
        positive: ClassMetrics { precision: pos_p, recall: pos_r, f1: pos_f1 },
        negative: ClassMetrics { precision: neg_p, recall: neg_r, f1: neg_f1 },
        accuracy: (tp + tn) as f64 / examples.len() as f64,
        auc: None,
        threshold,
        degenerate,
    })
}

/// AUC as the normalized Mann-Whitney statistic with ties counted one half;
/// this equals the trapezoidal area under the ROC curve.
pub fn roc_auc(examples: &[ScoredExample]) -> Result<f64, MetricsError> {
    let positives = examples.iter().filter(|e| e.label).count();
    let negatives = examples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::DegenerateClasses);
    }
    // Average ranks over ties, then sum the positive ranks.
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| examples[a].score.total_cmp(&examples[b].score));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len()
            && examples[order[j]].score.total_cmp(&examples[order[i]].score).is_eq()
        {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if examples[idx].label {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Softmax over a deduplicated beam's parser scores; the result sums to 1.
pub fn approximate_confidence(parser_scores: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if parser_scores.is_empty() {
        return Err(MetricsError::EmptyBeam);
    }
    let max = parser_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = parser_scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Population standard deviation of the ten dropout-pass scores. Used
/// negated wherever a "higher = more confident" score is needed.
pub fn dropout_uncertainty(dropout_scores: &[f64]) -> Result<f64, MetricsError> {
    if dropout_scores.len() != DROPOUT_PASSES {
        return Err(MetricsError::WrongArity {
            expected: DROPOUT_PASSES,
            found: dropout_scores.len(),
        });
    }
    if dropout_scores.iter().all(|x| *x == dropout_scores[0]) {
        return Ok(0.0);
    }
    let n = dropout_scores.len() as f64;
    let mean = dropout_scores.iter().sum::<f64>() / n;
    let var = dropout_scores.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Accuracy-maximizing threshold: candidates are the midpoints between
/// consecutive sorted distinct scores plus two infinite sentinels; ties
/// resolve toward the higher threshold.
pub fn best_threshold(examples: &[ScoredExample]) -> f64 {
    let mut scores: Vec<f64> = examples.iter().map(|e| e.score).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    for pair in scores.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(f64::INFINITY);

    let mut best = (f64::NEG_INFINITY, usize::MIN);
    for t in candidates {
        let correct = examples
            .iter()
            .filter(|e| (e.score >= t) == e.label)
            .count();
        if correct >= best.1 {
            best = (t, correct);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub threshold: f64,
    pub test_examples: usize,
    pub report: MetricsReport,
}

/// Cross-validation output: per-fold results, their macro-average, and AUC
/// both pooled over all examples and averaged over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfoldReport {
    pub folds: Vec<FoldResult>,
    pub mean: MetricsReport,
    pub auc_pooled: f64,
    pub auc_fold_mean: Option<f64>,
}

/// 5-fold cross-validation partitioned by databases: for each fold the
/// threshold is chosen on the other folds by exhaustive accuracy sweep, and
/// fold metrics are macro-averaged. AUC is threshold-free and also computed
/// pooled.
pub fn kfold_eval(
    examples: &[ScoredExample],
    k: usize,
    seed: u64,
) -> Result<KfoldReport, MetricsError> {
    if examples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let dbs: BTreeSet<&str> = examples.iter().map(|e| e.db_id.as_str()).collect();
    if dbs.len() < k {
        return Err(MetricsError::TooFewDatabases { needed: k, found: dbs.len() });
    }
    let mut dbs: Vec<&str> = dbs.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dbs.shuffle(&mut rng);
    let fold_of: BTreeMap<&str, usize> =
        dbs.iter().enumerate().map(|(i, db)| (*db, i % k)).collect();

    let mut folds = Vec::new();
    for fold in 0..k {
        let (test, calib): (Vec<&ScoredExample>, Vec<&ScoredExample>) =
            examples.iter().partition(|e| fold_of[e.db_id.as_str()] == fold);
        let calib_owned: Vec<ScoredExample> = calib.into_iter().cloned().collect();
        let test_owned: Vec<ScoredExample> = test.into_iter().cloned().collect();
        let threshold = best_threshold(&calib_owned);
        let mut report = confusion_metrics(&test_owned, threshold)?;
        report.auc = roc_auc(&test_owned).ok();
        folds.push(FoldResult { fold, threshold, test_examples: test_owned.len(), report });
    }

    let nf = folds.len() as f64;
    let mean_class = |f: &dyn Fn(&FoldResult) -> ClassMetrics| ClassMetrics {
        precision: folds.iter().map(|r| f(r).precision).sum::<f64>() / nf,
        recall: folds.iter().map(|r| f(r).recall).sum::<f64>() / nf,
        f1: folds.iter().map(|r| f(r).f1).sum::<f64>() / nf,
    };
    let auc_pooled = roc_auc(examples)?;
    let fold_aucs: Vec<f64> = folds.iter().filter_map(|r| r.report.auc).collect();
    let auc_fold_mean = if fold_aucs.len() == folds.len() {
        Some(fold_aucs.iter().sum::<f64>() / nf)
    } else {
        None
    };
    let mean = MetricsReport {
        positive: mean_class(&|r: &FoldResult| r.report.positive),
        negative: mean_class(&|r: &FoldResult| r.report.negative),
        accuracy: folds.iter().map(|r| r.report.accuracy).sum::<f64>() / nf,
        auc: Some(auc_pooled),
        threshold: folds.iter().map(|r| r.threshold).sum::<f64>() / nf,
        degenerate: Vec::new(),
    };
    Ok(KfoldReport { folds, mean, auc_pooled, auc_fold_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(db: &str, score: f64, label: bool) -> ScoredExample {
        ScoredExample {
            question_id: format!("q{score}{label}"),
            db_id: db.into(),
            score,
            label,
            beam_rank: 0,
        }
    }

    #[test]
    fn perfect_scorer_all_ones() {
        let examples = vec![ex("a", 0.9, true), ex("a", 0.8, true), ex("a", 0.1, false)];
        let m = confusion_metrics(&examples, 0.5).unwrap();
        assert_eq!(m.positive.precision, 1.0);
        assert_eq!(m.positive.recall, 1.0);
        assert_eq!(m.positive.f1, 1.0);
        assert_eq!(m.negative.precision, 1.0);
        assert_eq!(m.negative.recall, 1.0);
        assert_eq!(m.accuracy, 1.0);
        assert!(m.degenerate.is_empty());
    }

    #[test]
    fn all_positive_predictions_on_balanced_data() {
        let examples =
            vec![ex("a", 0.9, true), ex("a", 0.8, false), ex("a", 0.7, true), ex("a", 0.6, false)];
        let m = confusion_metrics(&examples, 0.0).unwrap();
        assert_eq!(m.positive.recall, 1.0);
        assert_eq!(m.negative.recall, 0.0);
        assert_eq!(m.accuracy, 0.5);
        assert!(m.degenerate.contains(&"negative_precision".to_string()));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(confusion_metrics(&[], 0.5), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn auc_separated_is_one() {
        let examples = vec![ex("a", 0.9, true), ex("a", 0.8, true), ex("a", 0.2, false)];
        assert_eq!(roc_auc(&examples).unwrap(), 1.0);
    }

    #[test]
    fn auc_constant_scorer_is_exactly_half() {
        let examples =
            vec![ex("a", 0.5, true), ex("a", 0.5, false), ex("a", 0.5, true), ex("a", 0.5, false)];
        assert_eq!(roc_auc(&examples).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_rejected() {
        let examples = vec![ex("a", 0.5, true)];
        assert!(matches!(roc_auc(&examples), Err(MetricsError::DegenerateClasses)));
    }

    /// Brute-force pairwise concordance oracle.
    fn auc_oracle(examples: &[ScoredExample]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for p in examples.iter().filter(|e| e.label) {
            for n in examples.iter().filter(|e| !e.label) {
                pairs += 1;
                total += if p.score > n.score {
                    1.0
                } else if p.score == n.score {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / pairs as f64
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let examples: Vec<ScoredExample> = (0..200)
                .map(|_| {
                    // Coarse grid forces plenty of ties.
                    let score = (rng.gen_range(0..20) as f64) / 20.0;
                    ex("a", score, rng.gen_bool(0.4))
                })
                .collect();
            if examples.iter().all(|e| e.label) || examples.iter().all(|e| !e.label) {
                continue;
            }
            let fast = roc_auc(&examples).unwrap();
            let slow = auc_oracle(&examples);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        use rand::Rng;
        let examples: Vec<ScoredExample> =
            (0..100).map(|_| ex("a", rng.gen::<f64>(), rng.gen_bool(0.5))).collect();
        let transformed: Vec<ScoredExample> = examples
            .iter()
            .map(|e| ScoredExample { score: (3.0 * e.score).exp() + 1.0, ..e.clone() })
            .collect();
        let a = roc_auc(&examples).unwrap();
        let b = roc_auc(&transformed).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn softmax_basics() {
        assert_eq!(approximate_confidence(&[3.0]).unwrap(), vec![1.0]);
        let two = approximate_confidence(&[1.0, 1.0]).unwrap();
        assert_eq!(two, vec![0.5, 0.5]);
        assert!(matches!(approximate_confidence(&[]), Err(MetricsError::EmptyBeam)));
    }

    #[test]
    fn softmax_shift_invariance_and_normalization() {
        let scores = [-4.2, -1.0, -0.3, -7.7, -2.2];
        let shifted: Vec<f64> = scores.iter().map(|s| s + 123.456).collect();
        let a = approximate_confidence(&scores).unwrap();
        let b = approximate_confidence(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dropout_uncertainty_cases() {
        assert_eq!(dropout_uncertainty(&[0.7; 10]).unwrap(), 0.0);
        let alternating = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert_eq!(dropout_uncertainty(&alternating).unwrap(), 0.5);
        assert!(matches!(
            dropout_uncertainty(&[1.0, 2.0]),
            Err(MetricsError::WrongArity { expected: 10, found: 2 })
        ));
    }

    #[test]
    fn dropout_matches_two_pass_reference() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let values: Vec<f64> = (0..10).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mean = values.iter().sum::<f64>() / 10.0;
            let reference =
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 10.0).sqrt();
            assert!((dropout_uncertainty(&values).unwrap() - reference).abs() < 1e-12);
        }
    }

    fn oracle_examples(k_dbs: usize, per_db: usize) -> Vec<ScoredExample> {
        let mut out = Vec::new();
        for db in 0..k_dbs {
            for i in 0..per_db {
                let label = i % 2 == 0;
                out.push(ScoredExample {
                    question_id: format!("q{db}_{i}"),
                    db_id: format!("db{db}"),
                    score: if label { 1.0 } else { 0.0 },
                    label,
                    beam_rank: 0,
                });
            }
        }
        out
    }

    #[test]
    fn kfold_oracle_scorer_is_perfect() {
        let examples = oracle_examples(6, 8);
        let report = kfold_eval(&examples, 5, 0).unwrap();
        for fold in &report.folds {
            assert_eq!(fold.report.accuracy, 1.0);
        }
        assert_eq!(report.mean.accuracy, 1.0);
        assert_eq!(report.auc_pooled, 1.0);
    }

    #[test]
    fn kfold_anti_oracle_hits_class_prior() {
        // score = 1 - label: without direction flipping the sweep can only
        // predict everything positive or everything negative, so per-fold
        // accuracy equals the majority class share (0.5 on balanced data).
        let mut examples = oracle_examples(6, 8);
        for e in &mut examples {
            e.score = if e.label { 0.0 } else { 1.0 };
        }
        let report = kfold_eval(&examples, 5, 0).unwrap();
        for fold in &report.folds {
            assert_eq!(fold.report.accuracy, 0.5);
        }
    }

    #[test]
    fn kfold_deterministic_and_db_disjoint() {
        let examples = oracle_examples(11, 5);
        let a = kfold_eval(&examples, 5, 9).unwrap();
        let b = kfold_eval(&examples, 5, 9).unwrap();
        assert_eq!(a, b);
        let sizes: usize = a.folds.iter().map(|f| f.test_examples).sum();
        assert_eq!(sizes, examples.len());
    }

    #[test]
    fn kfold_needs_enough_databases() {
        let examples = oracle_examples(3, 4);
        assert!(matches!(
            kfold_eval(&examples, 5, 0),
            Err(MetricsError::TooFewDatabases { needed: 5, found: 3 })
        ));
    }

    #[test]
    fn threshold_monotonicity() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let examples: Vec<ScoredExample> =
            (0..60).map(|_| ex("a", rng.gen::<f64>(), rng.gen_bool(0.5))).collect();
        let mut last_recall = f64::INFINITY;
        for t in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let m = confusion_metrics(&examples, t).unwrap();
            assert!(m.positive.recall <= last_recall + 1e-12);
            last_recall = m.positive.recall;
        }
    }
}
