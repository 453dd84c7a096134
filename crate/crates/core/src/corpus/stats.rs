use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Instance};
use crate::labels::{EmotionLabel, MotivationLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderCounts {
    pub male: usize,
    pub female: usize,
    pub unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub n_instances: usize,
    pub motivation_counts: BTreeMap<String, usize>,
    pub emotion_counts: BTreeMap<String, usize>,
    pub gender: GenderCounts,
    /// The gender numbers come from a word list, not annotation.
    pub gender_method: String,
}

// Heuristic lexicon over the character string. Anything else is unknown.
const MALE: &[&str] = &[
    "he", "him", "his", "himself", "man", "boy", "father", "dad", "husband", "brother", "son",
    "uncle", "grandfather", "grandpa", "king", "mr", "mr.", "guy", "boyfriend", "john", "tom",
    "tim", "bob", "mike", "james", "david", "joe", "jack", "dan", "ben", "jake", "bill", "jim",
    "kevin", "steve", "mark", "paul", "josh", "ryan", "eric", "greg", "frank", "fred", "gary",
    "larry", "carl", "adam", "peter", "henry", "george", "jose", "luis", "carlos", "tony",
    "nick", "matt", "chris", "andy", "neil", "ken", "ron", "sam",
];
const FEMALE: &[&str] = &[
    "she", "her", "hers", "herself", "woman", "girl", "mother", "mom", "wife", "sister",
    "daughter", "aunt", "grandmother", "grandma", "queen", "mrs", "mrs.", "ms", "ms.", "lady",
    "girlfriend", "mary", "sue", "anna", "amy", "kate", "lisa", "jane", "sarah", "jen", "jenny",
    "emily", "beth", "ann", "linda", "karen", "susan", "ella", "gina", "tina", "kelly", "gwen",
    "ashley", "jessica", "laura", "julie", "nancy", "betty", "helen", "ruth", "maria", "lucy",
    "sally", "ellen", "rachel", "anne", "ana", "cindy",
];

/// Lexicon lookup: the first word of the character string that appears in
/// either list decides.
pub fn gender_of(character: &str) -> Gender {
    for word in character.split_whitespace() {
        let w = word
            .trim_matches(|c: char| !c.is_alphanumeric() && c != '.')
            .trim_end_matches("'s")
            .to_lowercase();
        if MALE.contains(&w.as_str()) {
            return Gender::Male;
        }
        if FEMALE.contains(&w.as_str()) {
            return Gender::Female;
        }
    }
    Gender::Unknown
}

/// Per-label counts in both spaces (every label listed, zero included) and
/// the heuristic gender distribution of characters.
pub fn corpus_stats(instances: &[Instance]) -> Result<LabelStats, CorpusError> {
    if instances.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut motivation_counts: BTreeMap<String, usize> =
        MotivationLabel::ALL.iter().map(|l| (l.id().to_string(), 0)).collect();
    let mut emotion_counts: BTreeMap<String, usize> =
        EmotionLabel::ALL.iter().map(|l| (l.id().to_string(), 0)).collect();
    let mut gender = GenderCounts::default();
    for inst in instances {
        for m in &inst.motivations {
            *motivation_counts.get_mut(m.id()).expect("all labels seeded") += 1;
        }
        for e in &inst.emotions {
            *emotion_counts.get_mut(e.id()).expect("all labels seeded") += 1;
        }
        match gender_of(&inst.character) {
            Gender::Male => gender.male += 1,
            Gender::Female => gender.female += 1,
            Gender::Unknown => gender.unknown += 1,
        }
    }
    Ok(LabelStats {
        n_instances: instances.len(),
        motivation_counts,
        emotion_counts,
        gender,
        gender_method: "heuristic: pronoun and given-name lexicon over the character string".into(),
    })
}
