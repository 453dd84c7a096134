use std::collections::BTreeSet;

use super::model::{decide, tune_threshold};
use super::voting::{Voter, VotingConfig, VotingMode};
use crate::concept_kb::{labels_for, query_kb, ConceptKb};
use crate::corpus::Instance;
use crate::labels::LabelSpace;
use crate::metrics::{micro_prf, Prf};
use crate::scalar::Scalar;

/// Most frequent label in `train`; the lowest index wins ties.
pub fn majority_label(train: &[Instance], space: LabelSpace) -> usize {
    let mut counts = vec![0usize; space.len()];
    for inst in train {
        for l in labels_for(inst, space) {
            counts[l] += 1;
        }
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    counts.iter().position(|&c| c == max).unwrap_or(0)
}

/// Predicts the train majority label for every instance of `eval`.
pub fn majority_baseline_prf(train: &[Instance], eval: &[Instance], space: LabelSpace) -> Prf {
    let m = majority_label(train, space);
    let gold: Vec<BTreeSet<usize>> = eval.iter().map(|i| labels_for(i, space).into_iter().collect()).collect();
    let pred = vec![BTreeSet::from([m]); eval.len()];
    micro_prf(&gold, &pred).expect("equal lengths")
}

/// F1 from expected counts when each instance gets one label drawn
/// uniformly at random.
pub fn uniform_random_expected_f1(eval: &[Instance], space: LabelSpace) -> f64 {
    let gold_total: usize = eval.iter().map(|i| labels_for(i, space).len()).sum();
    if eval.is_empty() || gold_total == 0 {
        return 0.0;
    }
    let tp = gold_total as f64 / space.len() as f64;
    let p = tp / eval.len() as f64;
    let r = tp / gold_total as f64;
    2.0 * p * r / (p + r)
}

fn kb_only_dists<T: Scalar>(kb: &ConceptKb<T>, data: &[Instance]) -> Vec<Vec<T>> {
    let n = kb.space().len();
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let voter = Voter::<T>::new(VotingConfig { mode: VotingMode::Aver, alpha: 0.0, mlp_hidden: 0 }, n, &mut rng);
    let uniform = vec![T::one() / T::of_usize(n); n];
    data.iter()
        .map(|inst| {
            let dists: Vec<Vec<T>> = query_kb(kb, &inst.action).into_iter().map(|(_, d)| d.into_vec()).collect();
            voter.forward(&uniform, &dists).expect("same label space").0
        })
        .collect()
}

/// Knowledge-base-only classifier: uniform classifier output mixed with
/// `alpha = 0`. The threshold is tuned on `tune` and applied to `eval`.
pub fn kb_only_prf<T: Scalar>(kb: &ConceptKb<T>, tune: &[Instance], eval: &[Instance], grid: &[f64]) -> (f64, Prf) {
    let space = kb.space();
    let gold = |d: &[Instance]| -> Vec<BTreeSet<usize>> {
        d.iter().map(|i| labels_for(i, space).into_iter().collect()).collect()
    };
    let (tau, _) = tune_threshold(&kb_only_dists(kb, tune), &gold(tune), grid);
    let pred: Vec<_> = kb_only_dists(kb, eval).iter().map(|p| decide(p, T::of(tau))).collect();
    (tau, micro_prf(&gold(eval), &pred).expect("equal lengths"))
}
