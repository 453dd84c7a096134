//! Synthetic Story Commonsense release in the upstream `annotations.json`
//! layout. Sentences carry motivation- and emotion-correlated vocabulary and
//! annotators are noisy, so the whole pipeline (alignment, knowledge bases,
//! classifiers, generator) has a learnable signal without the real release.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::labels::{EmotionLabel, MotivationLabel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_stories: usize,
    pub lines_per_story: usize,
    pub annotators: usize,
    pub seed: u64,
    /// Probability that an annotator selects the true label.
    pub annotator_recall: f64,
    /// Probability that an annotator adds a spurious label.
    pub annotator_noise: f64,
    /// Probability that a sentence's wording follows its labels.
    pub text_fidelity: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_stories: 100,
            lines_per_story: 5,
            annotators: 3,
            seed: 0,
            annotator_recall: 0.85,
            annotator_noise: 0.15,
            text_fidelity: 0.85,
        }
    }
}

const NAMES: &[&str] = &[
    "Tom", "Kim", "Mary", "Jose", "Tim", "Sue", "Alex", "Anna", "Bob", "Jane", "Sam", "Lisa",
    "Jake", "Amy", "Chris", "Kate", "Dan", "Gina", "Pat", "Eric", "Beth", "Jordan", "Taylor",
    "Carl", "Ella", "Morgan", "Ben", "Sarah", "Lee", "Frank",
];

const OPENERS: &[&str] = &["", "", "", "One day ", "Later ", "Then ", "On Saturday ", "After school "];

fn motivation_words(m: MotivationLabel) -> (&'static [&'static str], &'static [&'static str]) {
    match m {
        MotivationLabel::Physiological => (
            &["ate", "cooked", "drank", "baked", "ordered", "grabbed"],
            &["pizza", "sandwich", "soup", "water", "breakfast", "dinner", "snack", "bread"],
        ),
        MotivationLabel::Stability => (
            &["saved", "fixed", "locked", "repaired", "insured", "paid"],
            &["money", "roof", "door", "car", "bill", "rent", "house", "savings"],
        ),
        MotivationLabel::Love => (
            &["called", "hugged", "visited", "married", "kissed", "invited"],
            &["friend", "girlfriend", "family", "grandmother", "neighbor", "partner", "cousin"],
        ),
        MotivationLabel::Esteem => (
            &["won", "practiced", "trained", "studied", "entered", "presented"],
            &["contest", "race", "trophy", "exam", "speech", "game", "award", "tournament"],
        ),
        MotivationLabel::SpiritualGrowth => (
            &["painted", "explored", "learned", "wrote", "discovered", "sketched"],
            &["poem", "mountain", "guitar", "ocean", "museum", "novel", "painting", "language"],
        ),
    }
}

fn emotion_clauses(e: EmotionLabel) -> &'static [&'static str] {
    match e {
        EmotionLabel::Joy => &["and felt happy", "with a big smile", "and laughed", "cheerfully", "and was delighted"],
        EmotionLabel::Trust => &["and felt confident", "with full faith", "trusting the plan", "and felt secure"],
        EmotionLabel::Sadness => &["and cried", "but felt lonely", "and was heartbroken", "sadly"],
        EmotionLabel::Surprise => &["and was shocked", "unexpectedly", "and gasped", "to great amazement"],
        EmotionLabel::Fear => &["and felt scared", "nervously", "and was terrified", "while trembling"],
        EmotionLabel::Disgust => &["and felt sick", "and was grossed out", "with disgust", "and frowned at the smell"],
        EmotionLabel::Anger => &["and was furious", "angrily", "and yelled", "and slammed the table"],
        EmotionLabel::Anticipation => &["and waited eagerly", "hoping for more", "and could not wait", "expecting news"],
    }
}

/// Emotion preferences per motivation; the rest of the mass is spread
/// evenly over the remaining labels.
fn emotion_given_motivation(m: MotivationLabel) -> [f64; 8] {
    use EmotionLabel::*;
    let (top, weights): ([EmotionLabel; 3], [f64; 3]) = match m {
        MotivationLabel::Physiological => ([Joy, Disgust, Anticipation], [0.4, 0.25, 0.15]),
        MotivationLabel::Stability => ([Fear, Trust, Anticipation], [0.35, 0.3, 0.15]),
        MotivationLabel::Love => ([Joy, Trust, Sadness], [0.35, 0.3, 0.15]),
        MotivationLabel::Esteem => ([Anticipation, Joy, Anger], [0.35, 0.25, 0.2]),
        MotivationLabel::SpiritualGrowth => ([Anticipation, Joy, Surprise], [0.4, 0.25, 0.15]),
    };
    let rest = (1.0 - weights.iter().sum::<f64>()) / 5.0;
    let mut p = [rest; 8];
    for (l, w) in top.iter().zip(weights) {
        p[l.index()] = w;
    }
    p
}

fn sample_weighted(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let mut u = rng.gen::<f64>();
    for (i, w) in p.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    p.len() - 1
}

struct LineDraw {
    actor: usize,
    motivation: MotivationLabel,
    emotion: EmotionLabel,
    text: String,
}

/// Builds the release as a JSON value keyed by story id.
pub fn synth_release(config: &SynthConfig) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stories = Map::new();
    for s in 0..config.n_stories {
        let story_id = format!("synth-{s:06}");
        let mut cast: Vec<&str> = NAMES.choose_multiple(&mut rng, 2).copied().collect();
        if rng.gen_bool(0.5) {
            cast.truncate(1);
        }
        let mut lines = Map::new();
        for l in 1..=config.lines_per_story {
            let draw = draw_line(&mut rng, &cast, config);
            let mut chars = Map::new();
            for (ci, name) in cast.iter().enumerate() {
                let appears = ci == draw.actor || rng.gen_bool(0.1);
                let entry = if appears {
                    let (m, e) = if ci == draw.actor {
                        (draw.motivation, draw.emotion)
                    } else {
                        let m = *MotivationLabel::ALL.choose(&mut rng).unwrap();
                        let e = *EmotionLabel::ALL.choose(&mut rng).unwrap();
                        (m, e)
                    };
                    annotated_character(&mut rng, m, e, config)
                } else {
                    json!({"app": false, "motiv": {}, "emotion": {}})
                };
                chars.insert((*name).to_string(), entry);
            }
            lines.insert(
                l.to_string(),
                json!({"text": draw.text, "characters": Value::Object(chars)}),
            );
        }
        stories.insert(
            story_id,
            json!({"title": format!("Story {s}"), "lines": Value::Object(lines)}),
        );
    }
    Value::Object(stories)
}

fn draw_line(rng: &mut ChaCha8Rng, cast: &[&str], config: &SynthConfig) -> LineDraw {
    let actor = if cast.len() > 1 && rng.gen_bool(0.25) { 1 } else { 0 };
    let motivation = *MotivationLabel::ALL.choose(rng).unwrap();
    let emotion = EmotionLabel::ALL[sample_weighted(rng, &emotion_given_motivation(motivation))];

    let worded_m = if rng.gen_bool(config.text_fidelity) {
        motivation
    } else {
        *MotivationLabel::ALL.choose(rng).unwrap()
    };
    let worded_e = if rng.gen_bool(config.text_fidelity) {
        emotion
    } else {
        *EmotionLabel::ALL.choose(rng).unwrap()
    };
    let (verbs, objects) = motivation_words(worded_m);
    let verb = verbs.choose(rng).unwrap();
    let object = objects.choose(rng).unwrap();
    let det = ["the", "a", "some", "the"].choose(rng).unwrap();
    let clause = emotion_clauses(worded_e).choose(rng).unwrap();
    let opener = OPENERS.choose(rng).unwrap();
    let name = cast[actor];
    let text = if opener.is_empty() {
        format!("{name} {verb} {det} {object} {clause}.")
    } else {
        format!("{opener}{name} {verb} {det} {object} {clause}.")
    };
    LineDraw {
        actor,
        motivation,
        emotion,
        text,
    }
}

fn annotated_character(
    rng: &mut ChaCha8Rng,
    m: MotivationLabel,
    e: EmotionLabel,
    config: &SynthConfig,
) -> Value {
    let skip_motiv = rng.gen_bool(0.08);
    let skip_emotion = rng.gen_bool(0.12);
    let mut motiv = Map::new();
    let mut emotion = Map::new();
    for a in 0..config.annotators {
        if !skip_motiv {
            let mut sel = Vec::new();
            if rng.gen_bool(config.annotator_recall) {
                sel.push(m.display_name().to_string());
            }
            if rng.gen_bool(config.annotator_noise) {
                sel.push(MotivationLabel::ALL.choose(rng).unwrap().display_name().to_string());
            }
            sel.dedup();
            motiv.insert(format!("ann{a}"), json!({"maslow": sel}));
        }
        if !skip_emotion {
            let mut sel = Vec::new();
            if rng.gen_bool(config.annotator_recall) {
                sel.push(format!("{}:{}", e.id(), rng.gen_range(2..=3)));
            }
            if rng.gen_bool(config.annotator_noise) {
                let other = EmotionLabel::ALL.choose(rng).unwrap();
                sel.push(format!("{}:{}", other.id(), rng.gen_range(1..=3)));
            }
            emotion.insert(format!("ann{a}"), json!({"plutchik": sel}));
        }
    }
    json!({"app": true, "motiv": Value::Object(motiv), "emotion": Value::Object(emotion)})
}
