use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnnotatedLine, Instance};

/// Why candidate (story, line, character) triples did not become instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionSummary {
    pub candidates: usize,
    pub emitted: usize,
    /// No annotator selected anything in either space.
    pub unannotated: usize,
    pub missing_motivation: usize,
    pub missing_emotion: usize,
    pub missing_both: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignOutput {
    pub instances: Vec<Instance>,
    pub rejected: RejectionSummary,
}

/// Aggregates annotator votes (a label is active iff at least
/// `agreement_min` annotators chose it) and emits an [`Instance`] for every
/// triple whose motivation and emotion sets are both nonempty.
pub fn align_instances(lines: &[AnnotatedLine], agreement_min: usize) -> AlignOutput {
    let agreement_min = agreement_min.max(1);

    // line texts per story, any character
    let mut texts: BTreeMap<&str, BTreeMap<usize, &str>> = BTreeMap::new();
    for l in lines {
        let story = texts.entry(l.story_id.as_str()).or_default();
        let slot = story.entry(l.line_idx).or_insert(l.sentence.as_str());
        if slot.is_empty() {
            *slot = l.sentence.as_str();
        }
    }

    let mut sorted: Vec<&AnnotatedLine> = lines.iter().collect();
    sorted.sort_by(|a, b| {
        (a.story_id.as_str(), a.line_idx, a.character.as_str())
            .cmp(&(b.story_id.as_str(), b.line_idx, b.character.as_str()))
    });

    let mut rejected = RejectionSummary::default();
    let mut instances = Vec::new();
    for line in sorted {
        rejected.candidates += 1;
        let motivations = aggregate(&line.motivation_votes, agreement_min);
        let emotions = aggregate(&line.emotion_votes, agreement_min);
        match (motivations.is_empty(), emotions.is_empty()) {
            (false, false) => {
                let history = texts[line.story_id.as_str()]
                    .range(..line.line_idx)
                    .map(|(_, s)| s.to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                instances.push(Instance {
                    story_id: line.story_id.clone(),
                    line_idx: line.line_idx,
                    character: line.character.clone(),
                    history,
                    action: line.sentence.clone(),
                    motivations,
                    emotions,
                });
            }
            (true, true) => {
                let untouched = line.motivation_votes.iter().all(BTreeSet::is_empty)
                    && line.emotion_votes.iter().all(BTreeSet::is_empty);
                if untouched {
                    rejected.unannotated += 1;
                } else {
                    rejected.missing_both += 1;
                }
            }
            (true, false) => rejected.missing_motivation += 1,
            (false, true) => rejected.missing_emotion += 1,
        }
    }
    rejected.emitted = instances.len();
    AlignOutput { instances, rejected }
}

fn aggregate<L: Ord + Copy>(votes: &[BTreeSet<L>], agreement_min: usize) -> BTreeSet<L> {
    let mut counts: BTreeMap<L, usize> = BTreeMap::new();
    for selection in votes {
        for &label in selection {
            *counts.entry(label).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, n)| n >= agreement_min)
        .map(|(l, _)| l)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{EmotionLabel, MotivationLabel};
    use proptest::prelude::*;

    fn line(
        story: &str,
        idx: usize,
        ch: &str,
        m: Vec<Vec<MotivationLabel>>,
        e: Vec<Vec<EmotionLabel>>,
    ) -> AnnotatedLine {
        AnnotatedLine {
            story_id: story.into(),
            line_idx: idx,
            character: ch.into(),
            sentence: format!("Sentence {idx}."),
            motivation_votes: m.into_iter().map(|v| v.into_iter().collect()).collect(),
            emotion_votes: e.into_iter().map(|v| v.into_iter().collect()).collect(),
        }
    }

    use EmotionLabel::*;
    use MotivationLabel::*;

    #[test]
    fn needs_both_label_sets() {
        let out = align_instances(
            &[line("s", 1, "Kim", vec![vec![Esteem], vec![Esteem]], vec![])],
            2,
        );
        assert!(out.instances.is_empty());
        assert_eq!(out.rejected.missing_emotion, 1);
    }

    #[test]
    fn majority_vote() {
        let out = align_instances(
            &[line(
                "s",
                1,
                "Kim",
                vec![vec![Physiological], vec![Physiological, Esteem], vec![]],
                vec![vec![Joy], vec![Joy], vec![Fear]],
            )],
            2,
        );
        assert_eq!(out.instances.len(), 1);
        assert_eq!(out.instances[0].motivations.iter().copied().collect::<Vec<_>>(), [Physiological]);
        assert_eq!(out.instances[0].emotions.iter().copied().collect::<Vec<_>>(), [Joy]);
    }

    #[test]
    fn history_uses_all_previous_lines() {
        let both = || (vec![vec![Love], vec![Love]], vec![vec![Trust], vec![Trust]]);
        let (m, e) = both();
        let lines = vec![
            line("s", 1, "Tom", vec![], vec![]),
            line("s", 2, "Kim", vec![], vec![]),
            line("s", 3, "Kim", m, e),
        ];
        let out = align_instances(&lines, 2);
        assert_eq!(out.instances.len(), 1);
        assert_eq!(out.instances[0].history, ["Sentence 1.", "Sentence 2."]);
        assert_eq!(out.rejected.unannotated, 2);
        let (m, e) = both();
        let first = align_instances(&[line("s", 1, "Kim", m, e)], 2);
        assert!(first.instances[0].history.is_empty());
    }

    fn arb_votes<L: std::fmt::Debug + Clone + 'static>(all: &'static [L]) -> impl Strategy<Value = Vec<Vec<L>>> {
        prop::collection::vec(prop::sample::subsequence(all.to_vec(), 0..=all.len()), 0..4)
    }

    proptest! {
        #[test]
        fn emitted_instances_have_both_sets_and_ignore_annotator_order(
            m in arb_votes(&MotivationLabel::ALL),
            e in arb_votes(&EmotionLabel::ALL),
            k in 1usize..4,
        ) {
            let a = line("s", 1, "Kim", m.clone(), e.clone());
            let mut rev = a.clone();
            rev.motivation_votes.reverse();
            rev.emotion_votes.reverse();
            let out = align_instances(std::slice::from_ref(&a), k);
            let out_rev = align_instances(&[rev], k);
            prop_assert_eq!(&out, &out_rev);
            prop_assert_eq!(&out, &align_instances(&[a], k));
            for inst in &out.instances {
                prop_assert!(!inst.motivations.is_empty() && !inst.emotions.is_empty());
            }
            let r = out.rejected;
            prop_assert_eq!(r.candidates, r.emitted + r.unannotated + r.missing_motivation + r.missing_emotion + r.missing_both);
        }
    }
}
