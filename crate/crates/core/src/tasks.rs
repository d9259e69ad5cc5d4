//! Downstream harnesses: beam re-ranking (always, or only after a detected
//! error), answer triggering, and interaction triggering with simulated
//! oracle corrections.

use serde::{Deserialize, Serialize};

use crate::data::BeamRecord;
use crate::error::TaskError;

/// A monotone x-axis curve with its method name, written as CSV
/// `method,x,y` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub method: String,
    pub points: Vec<(usize, f64)>,
}

impl Curve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,x,y\n");
        for (x, y) in &self.points {
            out.push_str(&format!("{},{},{}\n", self.method, x, y));
        }
        out
    }

    /// Merges several curves into one CSV block (shared header).
    pub fn csv_block(curves: &[Curve]) -> String {
        let mut out = String::from("method,x,y\n");
        for curve in curves {
            for (x, y) in &curve.points {
                out.push_str(&format!("{},{},{}\n", curve.method, x, y));
            }
        }
        out
    }
}

/// One question's top-ranked prediction with its detector score and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Top1Example {
    pub question_id: String,
    pub score: f64,
    pub correct: bool,
}

/// Stable descending sort of a beam by detector score; ties keep parser
/// rank order.
pub fn rerank_all(beam: &BeamRecord, scores: &[f64]) -> Result<BeamRecord, TaskError> {
    if scores.len() != beam.predictions.len() {
        return Err(TaskError::ArityMismatch {
            predictions: beam.predictions.len(),
            scores: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let predictions = order.iter().map(|&i| beam.predictions[i].clone()).collect();
    Ok(BeamRecord { predictions, ..beam.clone() })
}

/// Re-ranks only when the top-ranked prediction scores below `threshold`.
pub fn ed_then_rerank(
    beam: &BeamRecord,
    scores: &[f64],
    threshold: f64,
) -> Result<BeamRecord, TaskError> {
    if scores.len() != beam.predictions.len() {
        return Err(TaskError::ArityMismatch {
            predictions: beam.predictions.len(),
            scores: scores.len(),
        });
    }
    if scores[0] >= threshold {
        Ok(beam.clone())
    } else {
        rerank_all(beam, scores)
    }
}

/// Fraction of beams containing at least one correct prediction.
pub fn beam_hit_rate(beams: &[BeamRecord]) -> f64 {
    if beams.is_empty() {
        return 0.0;
    }
    let hits = beams
        .iter()
        .filter(|b| b.predictions.iter().any(|p| p.label.is_some_and(|l| l.is_correct())))
        .count();
    hits as f64 / beams.len() as f64
}

/// Fraction of beams whose top prediction is correct.
pub fn top1_accuracy(beams: &[BeamRecord]) -> f64 {
    if beams.is_empty() {
        return 0.0;
    }
    let correct = beams
        .iter()
        .filter(|b| b.top().label.is_some_and(|l| l.is_correct()))
        .count();
    correct as f64 / beams.len() as f64
}

/// Answer-triggering curve: sweeping the decision threshold from high to
/// low, plot (questions answered, answer precision). The final point answers
/// everything, so its precision equals top-1 accuracy.
pub fn answer_curve(examples: &[Top1Example], method: &str) -> Result<Curve, TaskError> {
    if examples.is_empty() {
        return Err(TaskError::EmptyInput);
    }
    let mut sorted: Vec<&Top1Example> = examples.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = Vec::new();
    let mut answered = 0usize;
    let mut correct = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        // Answer every question tied at this score level together.
        let mut j = i;
        while j < sorted.len() && sorted[j].score.total_cmp(&sorted[i].score).is_eq() {
            answered += 1;
            correct += usize::from(sorted[j].correct);
            j += 1;
        }
        points.push((answered, correct as f64 / answered as f64));
        i = j;
    }
    Ok(Curve { method: method.to_string(), points })
}

/// Largest number of answered questions whose precision stays at or above
/// `target`; 0 when no point qualifies.
pub fn questions_at_precision(curve: &Curve, target: f64) -> usize {
    curve
        .points
        .iter()
        .filter(|(_, precision)| *precision >= target)
        .map(|(answered, _)| *answered)
        .max()
        .unwrap_or(0)
}

/// Interaction-triggering curve under oracle corrections: for each budget
/// `b`, the `b` lowest-scored questions are fixed and accuracy is
/// (untouched correct + b) / n. Non-decreasing, reaching 1.0 at b = n.
pub fn interaction_curve(examples: &[Top1Example], method: &str) -> Result<Curve, TaskError> {
    if examples.is_empty() {
        return Err(TaskError::EmptyInput);
    }
    let n = examples.len();
    let mut sorted: Vec<&Top1Example> = examples.iter().collect();
    // Most suspicious first; ties keep input order.
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    // untouched_correct[b] = correct among the n-b highest-scored questions.
    let mut points = Vec::with_capacity(n + 1);
    let total_correct: usize = sorted.iter().filter(|e| e.correct).count();
    let mut fixed_correct = 0usize; // correct questions inside the interacted prefix
    points.push((0, total_correct as f64 / n as f64));
    for (b, example) in sorted.iter().enumerate() {
        fixed_correct += usize::from(example.correct);
        let untouched_correct = total_correct - fixed_correct;
        let accuracy = (untouched_correct + b + 1) as f64 / n as f64;
        points.push((b + 1, accuracy));
    }
    Ok(Curve { method: method.to_string(), points })
}

/// Smallest interaction budget reaching `target` accuracy.
pub fn interactions_for_accuracy(curve: &Curve, target: f64) -> usize {
    curve
        .points
        .iter()
        .find(|(_, acc)| *acc >= target)
        .map(|(b, _)| *b)
        .unwrap_or_else(|| curve.points.last().map(|(b, _)| *b).unwrap_or(0))
}
