//! Concept extraction: tokenize, lemmatize with a small rule set, tag a
//! coarse part of speech and drop stop words and high-frequency lemmas.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Coarse part-of-speech classes produced by the tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
}

/// A content-word lemma.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Concept {
    pub lemma: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub stop_words: BTreeSet<String>,
    pub allowed_pos: BTreeSet<Pos>,
    /// Lemmas whose document frequency exceeds this fraction of the fitting
    /// corpus are excluded.
    pub high_frequency_threshold: f64,
    /// Result of [`ExtractionConfig::fit_high_frequency`].
    pub high_frequency: BTreeSet<String>,
    /// Optional floor applied to raw scores before per-concept
    /// normalization at query time. Off by default.
    pub score_floor: Option<f64>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            stop_words: STOP_WORDS.iter().map(|s| s.to_string()).collect(),
            allowed_pos: [Pos::Noun, Pos::Verb, Pos::Adjective].into_iter().collect(),
            high_frequency_threshold: 0.05,
            high_frequency: BTreeSet::new(),
            score_floor: None,
        }
    }
}

impl ExtractionConfig {
    /// Replaces the high-frequency set with lemmas whose document frequency
    /// over `docs` is strictly above the threshold.
    pub fn fit_high_frequency<'a, I>(&mut self, docs: I)
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.high_frequency.clear();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0usize;
        for doc in docs {
            n_docs += 1;
            let lemmas: BTreeSet<String> = self.candidates(doc).map(|c| c.lemma).collect();
            for l in lemmas {
                *df.entry(l).or_default() += 1;
            }
        }
        let cutoff = self.high_frequency_threshold * n_docs as f64;
        self.high_frequency = df
            .into_iter()
            .filter(|&(_, n)| n as f64 > cutoff)
            .map(|(l, _)| l)
            .collect();
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint::fingerprint(self)
    }

    /// Human-readable summary used in error messages.
    pub fn describe(&self) -> String {
        format!(
            "stop_words={} allowed_pos={:?} high_frequency_threshold={} high_frequency={} score_floor={:?}",
            self.stop_words.len(),
            self.allowed_pos,
            self.high_frequency_threshold,
            self.high_frequency.len(),
            self.score_floor
        )
    }

    /// Everything except the high-frequency filter.
    fn candidates<'a>(&'a self, text: &'a str) -> impl Iterator<Item = Concept> + 'a {
        words(text).into_iter().filter_map(move |w| {
            if w.chars().count() < 2 || w.chars().any(|c| c.is_ascii_digit()) {
                return None;
            }
            if self.stop_words.contains(&w) {
                return None;
            }
            let (lemma, pos) = lemmatize(&w);
            if !self.allowed_pos.contains(&pos) || self.stop_words.contains(&lemma) {
                return None;
            }
            Some(Concept { lemma, pos })
        })
    }
}

/// Concepts in document order, duplicates kept.
pub fn extract_concepts(text: &str, config: &ExtractionConfig) -> Vec<Concept> {
    config
        .candidates(text)
        .filter(|c| !config.high_frequency.contains(&c.lemma))
        .collect()
}

/// First occurrence of each lemma, in document order.
pub fn dedup_concepts(concepts: Vec<Concept>) -> Vec<Concept> {
    let mut seen = BTreeSet::new();
    concepts
        .into_iter()
        .filter(|c| seen.insert(c.lemma.clone()))
        .collect()
}

/// Lowercased word tokens; possessive `'s` and contractions are dropped.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}')) {
        let w = raw.trim_matches(|c| c == '\'' || c == '\u{2019}');
        if w.is_empty() {
            continue;
        }
        let w = w.replace('\u{2019}', "'");
        let base = match w.find('\'') {
            Some(i) => &w[..i],
            None => &w[..],
        };
        if !base.is_empty() {
            out.push(base.to_lowercase());
        }
    }
    out
}

/// Rule-based lemmatizer with a part-of-speech guess.
pub fn lemmatize(word: &str) -> (String, Pos) {
    if let Some(&(_, lemma)) = IRREGULAR_VERBS.iter().find(|(w, _)| *w == word) {
        return (lemma.to_string(), Pos::Verb);
    }
    if let Some(&(_, lemma)) = IRREGULAR_NOUNS.iter().find(|(w, _)| *w == word) {
        return (lemma.to_string(), Pos::Noun);
    }
    if ADJECTIVES.contains(&word) || LY_ADJECTIVES.contains(&word) {
        return (word.to_string(), Pos::Adjective);
    }
    if LY_NOUNS.contains(&word) || ING_NOUNS.contains(&word) {
        return (word.to_string(), Pos::Noun);
    }
    let n = word.len();
    if n > 4 && word.ends_with("ly") {
        return (word.to_string(), Pos::Adverb);
    }
    if n > 4 && word.ends_with("ied") {
        return (format!("{}y", &word[..n - 3]), Pos::Verb);
    }
    if n > 4 && word.ends_with("ing") {
        return (restore_stem(&word[..n - 3]), Pos::Verb);
    }
    if n > 3 && word.ends_with("ed") && !word.ends_with("eed") {
        return (restore_stem(&word[..n - 2]), Pos::Verb);
    }
    for suffix in ["ful", "ous", "ive", "able", "ible", "less", "ish"] {
        if n > suffix.len() + 2 && word.ends_with(suffix) {
            return (word.to_string(), Pos::Adjective);
        }
    }
    (singular(word), Pos::Noun)
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Undo consonant doubling and restore a dropped final `e`.
fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'f' | b'z') {
        return stem[..n - 1].to_string();
    }
    if n >= 2 {
        let last = b[n - 1];
        let prev = b[n - 2];
        // loved, danced, amazed, used, closed
        if matches!(last, b'v' | b'c' | b'z') || (last == b's' && is_vowel(prev) && n <= 6) {
            return format!("{stem}e");
        }
        // baked, hoped, shared, skated
        if (3..=4).contains(&n) {
            let c0 = b[n - 3];
            let cvc = !is_vowel(c0) && is_vowel(prev) && !is_vowel(last) && !matches!(last, b'w' | b'x' | b'y');
            let suffix = &stem[n - 2..];
            if cvc && !matches!(suffix, "en" | "er" | "on" | "ow" | "ew" | "et") {
                return format!("{stem}e");
            }
        }
    }
    stem.to_string()
}

fn singular(word: &str) -> String {
    let n = word.len();
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes"] {
        if n > suffix.len() && word.ends_with(suffix) {
            return word[..n - 2].to_string();
        }
    }
    if n > 3 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && !word.ends_with("is") {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

const IRREGULAR_VERBS: &[(&str, &str)] = &[
    ("went", "go"), ("gone", "go"), ("goes", "go"), ("ate", "eat"), ("eaten", "eat"),
    ("bought", "buy"), ("felt", "feel"), ("got", "get"), ("gotten", "get"), ("made", "make"),
    ("saw", "see"), ("seen", "see"), ("took", "take"), ("taken", "take"), ("ran", "run"),
    ("came", "come"), ("gave", "give"), ("given", "give"), ("found", "find"), ("told", "tell"),
    ("thought", "think"), ("left", "leave"), ("sat", "sit"), ("won", "win"), ("lost", "lose"),
    ("said", "say"), ("knew", "know"), ("known", "know"), ("began", "begin"), ("begun", "begin"),
    ("brought", "bring"), ("caught", "catch"), ("drank", "drink"), ("drunk", "drink"),
    ("drove", "drive"), ("driven", "drive"), ("fell", "fall"), ("fallen", "fall"), ("flew", "fly"),
    ("forgot", "forget"), ("forgotten", "forget"), ("heard", "hear"), ("kept", "keep"),
    ("met", "meet"), ("paid", "pay"), ("rode", "ride"), ("sang", "sing"), ("slept", "sleep"),
    ("spent", "spend"), ("stood", "stand"), ("swam", "swim"), ("taught", "teach"),
    ("threw", "throw"), ("woke", "wake"), ("wore", "wear"), ("wrote", "write"),
    ("written", "write"), ("broke", "break"), ("broken", "break"), ("chose", "choose"),
    ("built", "build"), ("sold", "sell"), ("sent", "send"), ("hid", "hide"), ("held", "hold"),
    ("led", "lead"), ("meant", "mean"), ("fought", "fight"), ("grew", "grow"), ("grown", "grow"),
    ("lay", "lie"), ("laid", "lay"), ("lent", "lend"), ("shot", "shoot"), ("shook", "shake"),
    ("stole", "steal"), ("stuck", "stick"), ("struck", "strike"), ("swore", "swear"),
    ("tore", "tear"), ("understood", "understand"), ("wept", "weep"), ("became", "become"),
    ("froze", "freeze"), ("frozen", "freeze"), ("bit", "bite"), ("blew", "blow"), ("dug", "dig"),
    ("fed", "feed"), ("hung", "hang"), ("slid", "slide"), ("spoke", "speak"), ("spoken", "speak"),
    ("lit", "light"), ("felled", "fell"), ("cried", "cry"), ("tried", "try"), ("died", "die"),
    ("lied", "lie"), ("dyed", "dye"),
];

const IRREGULAR_NOUNS: &[(&str, &str)] = &[
    ("children", "child"), ("men", "man"), ("women", "woman"), ("mice", "mouse"),
    ("feet", "foot"), ("teeth", "tooth"), ("people", "person"), ("geese", "goose"),
    ("knives", "knife"), ("wives", "wife"), ("lives", "life"), ("leaves", "leaf"),
    ("shelves", "shelf"), ("wolves", "wolf"), ("loaves", "loaf"),
];

const ADJECTIVES: &[&str] = &[
    "happy", "sad", "big", "small", "new", "old", "good", "bad", "great", "little", "young",
    "long", "nice", "hot", "cold", "scared", "angry", "excited", "nervous", "proud", "hungry",
    "tired", "sick", "lonely", "confident", "secure", "afraid", "glad", "upset", "busy",
    "free", "late", "early", "hard", "easy", "best", "better", "worse", "worst", "whole",
    "sure", "full", "empty", "ready", "rich", "poor", "safe", "warm", "cool", "fun", "funny",
    "huge", "tiny", "kind", "mean", "quiet", "loud", "strong", "weak", "delicious", "beautiful",
    "furious", "terrified", "delighted", "heartbroken", "eager", "shocked", "bored", "jealous",
    "thirsty", "sleepy", "favorite", "special", "perfect", "wrong", "right", "real", "brave",
    "calm", "clean", "dirty", "dark", "bright", "high", "low", "fresh", "fast", "slow",
];

const LY_ADJECTIVES: &[&str] = &[
    "ugly", "lonely", "friendly", "lovely", "lively", "silly", "likely", "holy", "elderly",
    "costly", "curly", "jolly", "chilly", "early", "only", "daily", "weekly", "sickly",
];

const LY_NOUNS: &[&str] = &[
    "family", "belly", "jelly", "reply", "supply", "ally", "rally", "bully", "july", "italy",
    "lily", "holly", "fly", "assembly", "butterfly",
];

const ING_NOUNS: &[&str] = &[
    "morning", "evening", "ring", "king", "thing", "wedding", "building", "painting", "spring",
    "ceiling", "string", "wing", "swing", "sibling", "pudding", "clothing", "something",
    "nothing", "anything", "everything", "meeting", "feeling", "ending", "beginning", "sing",
    "bring", "sting", "ping", "nothing", "lightning", "stuffing", "frosting", "icing",
    "parking", "camping", "fishing", "shopping", "cooking", "wing",
];

/// English function words.
pub const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "cannot", "could", "couldn", "did", "didn", "do", "does",
    "doesn", "doing", "don", "down", "during", "each", "even", "ever", "every", "few", "for",
    "from", "further", "had", "hadn", "has", "hasn", "have", "haven", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "however", "i", "if", "in",
    "into", "is", "isn", "it", "its", "itself", "just", "let", "ll", "may", "me", "might",
    "more", "most", "much", "must", "mustn", "my", "myself", "never", "no", "nor", "not",
    "now", "of", "off", "on", "once", "one", "only", "or", "other", "our", "ours",
    "ourselves", "out", "over", "own", "same", "shall", "she", "should", "shouldn", "so",
    "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "though", "through", "to", "too", "under",
    "until", "up", "upon", "us", "very", "was", "wasn", "we", "were", "weren", "what", "when",
    "where", "whether", "which", "while", "who", "whom", "whose", "why", "will", "with",
    "within", "without", "won't", "would", "wouldn", "yet", "you", "your", "yours",
    "yourself", "yourselves", "go", "get", "make", "take", "come", "be", "have", "do",
    "say", "really", "still", "back", "away", "around", "lot", "lots", "day", "today",
    "tomorrow", "yesterday", "later", "finally", "soon", "next", "last", "ago", "another",
    "something", "anything", "nothing", "everything", "someone", "anyone", "everyone",
    "decided", "decide", "wanted", "want", "started", "start", "tried", "try", "began",
    "begin",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn lemmas(text: &str) -> Vec<String> {
        extract_concepts(text, &ExtractionConfig::default())
            .into_iter()
            .map(|c| c.lemma)
            .collect()
    }

    #[test]
    fn all_stop_words() {
        assert!(lemmas("The the of and").is_empty());
    }

    #[test]
    fn content_words_are_lemmatized() {
        let got = lemmas("Kim enjoyed looking at the sea creatures");
        for want in ["enjoy", "look", "sea", "creature"] {
            assert!(got.iter().any(|l| l == want), "{want} missing from {got:?}");
        }
        assert!(!got.iter().any(|l| l == "the" || l == "at"));
    }

    #[test]
    fn deterministic() {
        let t = "Tom baked some bread and smiled happily at his friends' houses.";
        assert_eq!(lemmas(t), lemmas(t));
        let got = lemmas(t);
        assert_eq!(got, ["tom", "bake", "bread", "smile", "friend", "house"]);
    }

    #[test]
    fn lemmatizer_rules() {
        let cases = [
            ("running", "run"), ("stopped", "stop"), ("loved", "love"), ("danced", "dance"),
            ("practiced", "practice"), ("cried", "cry"), ("boxes", "box"), ("watches", "watch"),
            ("visited", "visit"), ("opened", "open"), ("wanted", "want"), ("ate", "eat"),
            ("children", "child"), ("glass", "glass"), ("making", "make"), ("writing", "write"),
            ("used", "use"), ("amazed", "amaze"), ("played", "play"), ("hugged", "hug"),
        ];
        for (w, want) in cases {
            assert_eq!(lemmatize(w).0, want, "{w}");
        }
        assert_eq!(lemmatize("happily").1, Pos::Adverb);
        assert_eq!(lemmatize("family").1, Pos::Noun);
        assert_eq!(lemmatize("lonely").1, Pos::Adjective);
    }

    #[test]
    fn high_frequency_fit() {
        let mut cfg = ExtractionConfig {
            high_frequency_threshold: 0.5,
            ..ExtractionConfig::default()
        };
        let docs = ["Tom ate pizza.", "Tom ate soup.", "Kim painted."];
        cfg.fit_high_frequency(docs.iter().copied());
        // tom and eat are in 2/3 docs > 0.5
        assert_eq!(cfg.high_frequency, ["eat", "tom"].iter().map(|s| s.to_string()).collect());
        let got: Vec<_> = extract_concepts("Tom ate pizza.", &cfg).into_iter().map(|c| c.lemma).collect();
        assert_eq!(got, ["pizza"]);
        assert_ne!(cfg.fingerprint(), ExtractionConfig::default().fingerprint());
    }

    #[test]
    fn possessives_and_digits() {
        assert_eq!(words("Tom's dog can't 3 cats"), ["tom", "dog", "can", "3", "cats"]);
        assert_eq!(lemmas("Tom's 3 dogs"), ["tom", "dog"]);
    }
}
