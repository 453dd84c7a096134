use std::collections::BTreeMap;

use super::extract::{dedup_concepts, extract_concepts, Concept, ExtractionConfig};
use super::KbError;
use crate::corpus::Instance;
use crate::distribution::LabelDistribution;
use crate::labels::LabelSpace;
use crate::scalar::Scalar;

/// Built knowledge base. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptKb<T: Scalar> {
    pub(crate) space: LabelSpace,
    pub(crate) config: ExtractionConfig,
    pub(crate) config_fingerprint: String,
    pub(crate) counts: BTreeMap<String, Vec<u64>>,
    pub(crate) vocab_sizes: Vec<u64>,
    pub(crate) totals: Vec<u64>,
    pub(crate) scores: BTreeMap<String, Vec<T>>,
}

impl<T: Scalar> ConceptKb<T> {
    pub fn space(&self) -> LabelSpace {
        self.space
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.config
    }

    pub fn config_fingerprint(&self) -> &str {
        &self.config_fingerprint
    }

    /// `Num(c, s)` for every label, if `lemma` is known.
    pub fn counts(&self, lemma: &str) -> Option<&[u64]> {
        self.counts.get(lemma).map(Vec::as_slice)
    }

    /// Unnormalized scores.
    pub fn raw_scores(&self, lemma: &str) -> Option<&[T]> {
        self.scores.get(lemma).map(Vec::as_slice)
    }

    /// `V(s)` per label.
    pub fn vocab_sizes(&self) -> &[u64] {
        &self.vocab_sizes
    }

    /// `N(s)` per label.
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn n_concepts(&self) -> usize {
        self.counts.len()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub(crate) fn from_counts(
        space: LabelSpace,
        config: ExtractionConfig,
        counts: BTreeMap<String, Vec<u64>>,
    ) -> Self {
        let n = space.len();
        let mut vocab_sizes = vec![0u64; n];
        let mut totals = vec![0u64; n];
        for row in counts.values() {
            for (i, &c) in row.iter().enumerate() {
                if c > 0 {
                    vocab_sizes[i] += 1;
                    totals[i] += c;
                }
            }
        }
        let scores = counts
            .iter()
            .map(|(lemma, row)| (lemma.clone(), score_row(row, &vocab_sizes, &totals)))
            .collect();
        Self {
            space,
            config_fingerprint: config.fingerprint(),
            config,
            counts,
            vocab_sizes,
            totals,
            scores,
        }
    }
}

/// One knowledge-score entry from raw counts.
pub fn eq1_score<T: Scalar>(count: u64, concept_total: u64, vocab_size: u64, label_total: u64) -> T {
    if count == 0 || concept_total == 0 || label_total == 0 {
        return T::zero();
    }
    let share = T::of(count as f64) / T::of(concept_total as f64);
    share * (T::of(vocab_size as f64) / T::of(label_total as f64))
}

pub(crate) fn score_row<T: Scalar>(row: &[u64], vocab_sizes: &[u64], totals: &[u64]) -> Vec<T> {
    let concept_total: u64 = row.iter().sum();
    row.iter()
        .enumerate()
        .map(|(i, &c)| eq1_score(c, concept_total, vocab_sizes[i], totals[i]))
        .collect()
}

/// Active label indices of `inst` in `space`.
pub fn labels_for(inst: &Instance, space: LabelSpace) -> Vec<usize> {
    match space {
        LabelSpace::Motivation => inst.motivations.iter().map(|l| l.index()).collect(),
        LabelSpace::Emotion => inst.emotions.iter().map(|l| l.index()).collect(),
    }
}

/// Counts every concept occurrence in each instance's action once per
/// active label of that instance.
pub fn build_kb<T: Scalar>(
    instances: &[Instance],
    space: LabelSpace,
    config: &ExtractionConfig,
) -> Result<ConceptKb<T>, KbError> {
    if instances.is_empty() {
        return Err(KbError::Config("no instances to build from".into()));
    }
    let n = space.len();
    let mut counts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        let labels = labels_for(inst, space);
        if labels.is_empty() {
            return Err(KbError::Config(format!(
                "instance {} ({}) has no {} labels",
                i,
                inst.id(),
                space.id()
            )));
        }
        for concept in extract_concepts(&inst.action, config) {
            let row = counts.entry(concept.lemma).or_insert_with(|| vec![0; n]);
            for &l in &labels {
                row[l] += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(KbError::EmptyVocabulary(config.describe()));
    }
    Ok(ConceptKb::from_counts(space, config.clone(), counts))
}

/// Concept distributions for the action: one per distinct known concept,
/// in document order, each renormalized to sum to one.
pub fn query_kb<T: Scalar>(kb: &ConceptKb<T>, action_text: &str) -> Vec<(Concept, LabelDistribution<T>)> {
    let floor = kb.config.score_floor.map(T::of);
    dedup_concepts(extract_concepts(action_text, &kb.config))
        .into_iter()
        .filter_map(|c| {
            let raw = kb.scores.get(&c.lemma)?;
            let weights: Vec<T> = match floor {
                Some(f) => raw.iter().map(|&s| s.max(f)).collect(),
                None => raw.clone(),
            };
            LabelDistribution::from_weights(weights).ok().map(|d| (c, d))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{EmotionLabel, MotivationLabel};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn inst(action: &str, emotions: &[EmotionLabel]) -> Instance {
        Instance {
            story_id: "s".into(),
            line_idx: 1,
            character: "Kim".into(),
            history: vec![],
            action: action.into(),
            motivations: BTreeSet::from([MotivationLabel::Love]),
            emotions: emotions.iter().copied().collect(),
        }
    }

    #[test]
    fn hand_worked_cake_scores() {
        // counts joy=3, sadness=1; V/N joy=10/20, sadness=5/10
        let row = [3u64, 0, 1, 0, 0, 0, 0, 0];
        let v = [10u64, 0, 5, 0, 0, 0, 0, 0];
        let n = [20u64, 0, 10, 0, 0, 0, 0, 0];
        let s: Vec<f64> = score_row(&row, &v, &n);
        assert_eq!(s[0], 0.375);
        assert_eq!(s[2], 0.125);
        assert!(s.iter().enumerate().all(|(i, &x)| i == 0 || i == 2 || x == 0.0));

        let mut kb = ConceptKb::<f64>::from_counts(
            LabelSpace::Emotion,
            ExtractionConfig::default(),
            BTreeMap::from([("cake".to_string(), row.to_vec())]),
        );
        kb.vocab_sizes = v.to_vec();
        kb.totals = n.to_vec();
        kb.scores.insert("cake".into(), s);
        let q = query_kb(&kb, "cake");
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].0.lemma, "cake");
        assert_eq!(q[0].1.as_slice()[0], 0.75);
        assert_eq!(q[0].1.as_slice()[2], 0.25);
    }

    #[test]
    fn exclusive_concept_is_one_hot() {
        let kb: ConceptKb<f64> = build_kb(
            &[
                inst("Tom baked bread.", &[EmotionLabel::Joy]),
                inst("Tom cried.", &[EmotionLabel::Sadness]),
            ],
            LabelSpace::Emotion,
            &ExtractionConfig::default(),
        )
        .unwrap();
        let q = query_kb(&kb, "bread");
        assert_eq!(q[0].1, LabelDistribution::one_hot(8, EmotionLabel::Joy.index()));
        assert!(kb.raw_scores("bread").unwrap()[2] == 0.0);
        assert!(query_kb(&kb, "zebra xylophone").is_empty());
    }

    #[test]
    fn build_errors() {
        let cfg = ExtractionConfig::default();
        assert!(matches!(
            build_kb::<f64>(&[], LabelSpace::Emotion, &cfg),
            Err(KbError::Config(_))
        ));
        assert!(matches!(
            build_kb::<f64>(&[inst("The of and", &[EmotionLabel::Joy])], LabelSpace::Emotion, &cfg),
            Err(KbError::EmptyVocabulary(_))
        ));
    }

    #[test]
    fn floor_gives_full_support() {
        let cfg = ExtractionConfig {
            score_floor: Some(1e-3),
            ..ExtractionConfig::default()
        };
        let kb: ConceptKb<f64> =
            build_kb(&[inst("Tom baked bread.", &[EmotionLabel::Joy])], LabelSpace::Emotion, &cfg).unwrap();
        let q = query_kb(&kb, "bread");
        assert!(q[0].1.as_slice().iter().all(|&p| p > 0.0));
    }

    const WORDS: &[&str] = &["cake", "river", "guitar", "storm", "puppy", "lemon", "castle", "rocket"];

    fn arb_instance() -> impl Strategy<Value = Instance> {
        (
            prop::collection::vec(prop::sample::select(WORDS), 1..5),
            prop::sample::subsequence(EmotionLabel::ALL.to_vec(), 1..3),
        )
            .prop_map(|(ws, es)| inst(&ws.join(" "), &es))
    }

    proptest! {
        #[test]
        fn order_invariant_and_normalized(mut insts in prop::collection::vec(arb_instance(), 1..12)) {
            let cfg = ExtractionConfig::default();
            let a: ConceptKb<f64> = build_kb(&insts, LabelSpace::Emotion, &cfg).unwrap();
            insts.reverse();
            let b: ConceptKb<f64> = build_kb(&insts, LabelSpace::Emotion, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            for lemma in a.lemmas() {
                let row = a.counts(lemma).unwrap();
                let total: u64 = row.iter().sum();
                let shares: f64 = row.iter().map(|&c| c as f64 / total as f64).sum();
                prop_assert!((shares - 1.0).abs() < 1e-12);
                for (_, d) in query_kb(&a, lemma) {
                    let s: f64 = d.as_slice().iter().sum();
                    prop_assert!((s - 1.0).abs() < 1e-9);
                    prop_assert!(d.as_slice().iter().all(|&p| p >= 0.0));
                }
            }
        }
    }
}
