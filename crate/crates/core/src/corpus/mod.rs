//! HAIL corpus construction: ingest Story Commonsense annotations, align
//! motivation and emotion labels per (story, line, character), split by
//! story and summarize.

mod align;
mod io;
mod reader;
mod split;
mod stats;
pub mod synth;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{EmotionLabel, MotivationLabel, UnknownLabel};

pub use align::{align_instances, AlignOutput, RejectionSummary};
pub use io::{read_instances_jsonl, write_instances_jsonl};
pub use reader::{
    parse_story_annotations, read_release, records_from_json, read_release_csv, read_release_json, ParseConfig,
    RawRecord,
};
pub use split::{split_corpus, CorpusSplits, Partition, SplitManifest};
pub use stats::{corpus_stats, gender_of, Gender, GenderCounts, LabelStats};

/// Instance count reported for the aligned upstream release.
pub const REFERENCE_INSTANCE_COUNT: usize = 13_568;

/// Default annotator agreement: 2 of 3.
pub const DEFAULT_AGREEMENT_MIN: usize = 2;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("record {record}: missing field `{field}`")]
    MissingField { record: usize, field: &'static str },
    #[error("record {record}: invalid value {value:?} for `{field}`")]
    InvalidField {
        record: usize,
        field: &'static str,
        value: String,
    },
    #[error("record {record}: {source}")]
    Label {
        record: usize,
        #[source]
        source: UnknownLabel,
    },
    #[error("release format: {0}")]
    Format(String),
    #[error("split configuration: {0}")]
    Config(String),
    #[error("corpus is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One (story, line, character) triple with the raw per-annotator selections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedLine {
    pub story_id: String,
    /// 1-based.
    pub line_idx: usize,
    pub character: String,
    pub sentence: String,
    pub motivation_votes: Vec<BTreeSet<MotivationLabel>>,
    pub emotion_votes: Vec<BTreeSet<EmotionLabel>>,
}

/// One aligned human-activity record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub story_id: String,
    pub line_idx: usize,
    pub character: String,
    /// Sentences of lines 1..k-1, any character.
    pub history: Vec<String>,
    pub action: String,
    pub motivations: BTreeSet<MotivationLabel>,
    pub emotions: BTreeSet<EmotionLabel>,
}

impl Instance {
    /// `story_id:line_idx:character`.
    pub fn id(&self) -> String {
        format!("{}:{}:{}", self.story_id, self.line_idx, self.character)
    }
}

/// Parses raw records and aligns them into instances.
pub fn instances_from_records(
    records: Vec<RawRecord>,
    config: &ParseConfig,
    agreement_min: usize,
) -> Result<AlignOutput, CorpusError> {
    let lines = parse_story_annotations(records, *config)?;
    Ok(align_instances(&lines, agreement_min))
}
