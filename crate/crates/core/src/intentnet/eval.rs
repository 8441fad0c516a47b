use std::collections::BTreeMap;

use super::IntentNetError;

/// Unweighted mean of per-class recall over the classes present in `labels`.
pub fn balanced_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64, IntentNetError> {
    if labels.is_empty() {
        return Err(IntentNetError::EmptyInput);
    }
    if preds.len() != labels.len() {
        return Err(IntentNetError::ShapeMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    let mut per_class: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&p, &l) in preds.iter().zip(labels) {
        let e = per_class.entry(l).or_default();
        e.1 += 1;
        if p == l {
            e.0 += 1;
        }
    }
    let sum: f64 = per_class
        .values()
        .map(|&(hit, n)| hit as f64 / n as f64)
        .sum();
    Ok(sum / per_class.len() as f64)
}

/// Plain fraction of exact matches.
pub fn accuracy<T: PartialEq>(preds: &[T], labels: &[T]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
}
