//! Word-level tokenizer with atomic template tags.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::prompting::SPECIAL_TAGS;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

/// Lowercased words, apostrophe suffixes (`'s`), single punctuation
/// characters and the template tags, each a single token.
pub fn pre_tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '[' || c == '<' {
            for tag in SPECIAL_TAGS.iter().chain([PAD, UNK, BOS, EOS].iter()) {
                let n = tag.chars().count();
                if i + n <= chars.len() && chars[i..i + n].iter().copied().eq(tag.chars()) {
                    out.push(tag.to_string());
                    i += n;
                    continue 'outer;
                }
            }
        }
        if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
            continue;
        }
        if (c == '\'' || c == '\u{2019}') && chars.get(i + 1).is_some_and(|n| n.is_alphabetic()) {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i].is_alphabetic() {
                i += 1;
            }
            let suffix: String = chars[start..i].iter().collect();
            out.push(format!("'{}", suffix.to_lowercase()));
            continue;
        }
        out.push(c.to_string());
        i += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Tokenizer {
    /// Special tokens first, then words with count >= `min_count` by
    /// descending count, ties broken lexicographically.
    pub fn build<'a, I>(texts: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for tok in pre_tokenize(t) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut tokens: Vec<String> = [PAD, UNK, BOS, EOS]
            .iter()
            .chain(SPECIAL_TAGS.iter())
            .map(|s| s.to_string())
            .collect();
        let mut words: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, n)| *n >= min_count && !tokens.contains(w))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        tokens.extend(words.into_iter().map(|(w, _)| w));
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(mut self) -> Self {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        self
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(1)
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(UNK)
    }

    pub fn pad_id(&self) -> u32 {
        self.id(PAD)
    }

    pub fn bos_id(&self) -> u32 {
        self.id(BOS)
    }

    pub fn eos_id(&self) -> u32 {
        self.id(EOS)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        pre_tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    /// Space-joined tokens with punctuation and `'s` suffixes attached.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            let tok = self.token(id);
            if tok == PAD {
                continue;
            }
            let attach = tok.starts_with('\'')
                || (tok.chars().count() == 1 && matches!(tok, "." | "," | "!" | "?" | ";" | ":"));
            if !out.is_empty() && !attach {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }
}
