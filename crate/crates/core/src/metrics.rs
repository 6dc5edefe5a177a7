//! Answer-level metrics.

use crate::answer::AnswerSet;

/// Set-based F1. Both empty scores 1, exactly one empty scores 0.
pub fn f1(predicted: &AnswerSet, gold: &AnswerSet) -> f64 {
    let p = predicted.to_set();
    let g = gold.to_set();
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let hits = p.intersection(&g).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let precision = hits / p.len() as f64;
    let recall = hits / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// 1 on exact set (or scalar) equality, else 0.
pub fn denotation_accuracy(predicted: &AnswerSet, gold: &AnswerSet) -> u8 {
    u8::from(predicted.to_set() == gold.to_set())
}

/// Mean of the values; 0 for an empty batch.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
