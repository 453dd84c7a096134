use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Micro-averaged precision, recall and F1 over (instance, label) pairs,
/// with 0/0 read as 0.
pub fn micro_prf<L: Ord>(gold: &[BTreeSet<L>], pred: &[BTreeSet<L>]) -> Result<Prf, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { left: gold.len(), right: pred.len() });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let hit = g.intersection(p).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += g.len() - hit;
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf { precision, recall, f1, tp, fp, fn_ })
}
