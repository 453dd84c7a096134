//! Motivation and emotion concept knowledge bases.
//!
//! For concept `c` and label `s`, with `Num(c, s)` the number of times `c`
//! occurs in actions labelled `s`, `V(s)` the number of distinct concepts
//! seen under `s` and `N(s)` the total concept occurrences under `s`:
//!
//! ```text
//! E(c, s) = Num(c, s) / sum_s' Num(c, s')  *  V(s) / N(s)
//! ```
//!
//! Queries renormalize each concept's score vector onto the simplex.

mod extract;
mod kb;
mod store;

use thiserror::Error;

pub use extract::{
    dedup_concepts, extract_concepts, lemmatize, words, Concept, ExtractionConfig, Pos, STOP_WORDS,
};
pub use kb::{build_kb, eq1_score, labels_for, query_kb, ConceptKb};
pub use store::{load_kb, save_kb, to_json_string};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("no concepts survive the extraction filters ({0})")]
    EmptyVocabulary(String),
    #[error("knowledge base invariant violated: {0}")]
    Invariant(String),
    #[error("extraction config mismatch: expected fingerprint {expected}, file has {found}")]
    Incompatible { expected: String, found: String },
    #[error("malformed knowledge base file at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
