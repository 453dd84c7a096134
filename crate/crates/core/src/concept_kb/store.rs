use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::extract::ExtractionConfig;
use super::kb::{score_row, ConceptKb};
use super::KbError;
use crate::labels::LabelSpace;
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
struct PerLabel {
    #[serde(rename = "V")]
    vocab_size: u64,
    #[serde(rename = "N")]
    total: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ConceptEntry<T: Scalar> {
    counts: BTreeMap<String, u64>,
    scores: BTreeMap<String, T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct KbFile<T: Scalar> {
    task: LabelSpace,
    labels: Vec<String>,
    config_fingerprint: String,
    per_label: BTreeMap<String, PerLabel>,
    concepts: BTreeMap<String, ConceptEntry<T>>,
    extraction: ExtractionConfig,
}

/// Pretty JSON document; byte-identical for equal knowledge bases.
pub fn to_json_string<T: Scalar>(kb: &ConceptKb<T>) -> String {
    let labels: Vec<String> = kb.space.ids().into_iter().map(String::from).collect();
    let per_label = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            (
                l.clone(),
                PerLabel {
                    vocab_size: kb.vocab_sizes[i],
                    total: kb.totals[i],
                },
            )
        })
        .collect();
    let concepts = kb
        .counts
        .iter()
        .map(|(lemma, row)| {
            let scores = &kb.scores[lemma];
            let entry = ConceptEntry {
                counts: labels.iter().cloned().zip(row.iter().copied()).collect(),
                scores: labels.iter().cloned().zip(scores.iter().copied()).collect(),
            };
            (lemma.clone(), entry)
        })
        .collect();
    let file = KbFile {
        task: kb.space,
        labels,
        config_fingerprint: kb.config_fingerprint.clone(),
        per_label,
        concepts,
        extraction: kb.config.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("knowledge base serializes");
    s.push('\n');
    s
}

pub fn save_kb<T: Scalar>(kb: &ConceptKb<T>, path: &Path) -> Result<(), KbError> {
    fs::write(path, to_json_string(kb))?;
    Ok(())
}

/// Loads and re-validates a knowledge base. With `expected_fingerprint`,
/// a file built under another extraction config is refused.
pub fn load_kb<T: Scalar>(path: &Path, expected_fingerprint: Option<&str>) -> Result<ConceptKb<T>, KbError> {
    let text = fs::read_to_string(path)?;
    let file: KbFile<T> = serde_json::from_str(&text).map_err(|e| KbError::Format {
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })?;

    let space = file.task;
    let ids = space.ids();
    if file.labels != ids {
        return Err(KbError::Invariant(format!(
            "labels {:?} do not match the {} space",
            file.labels,
            space.id()
        )));
    }
    let own = file.extraction.fingerprint();
    if own != file.config_fingerprint {
        return Err(KbError::Invariant(format!(
            "stored fingerprint {} does not match the stored extraction config ({own})",
            file.config_fingerprint
        )));
    }
    if let Some(expected) = expected_fingerprint {
        if expected != file.config_fingerprint {
            return Err(KbError::Incompatible {
                expected: expected.to_string(),
                found: file.config_fingerprint,
            });
        }
    }

    let n = ids.len();
    let mut counts = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for (lemma, entry) in file.concepts {
        let mut row = vec![0u64; n];
        let mut srow = vec![T::zero(); n];
        for (label, c) in &entry.counts {
            let i = index(&ids, label, &lemma)?;
            row[i] = *c;
        }
        for (label, s) in &entry.scores {
            let i = index(&ids, label, &lemma)?;
            srow[i] = *s;
        }
        counts.insert(lemma.clone(), row);
        scores.insert(lemma, srow);
    }

    let mut vocab_sizes = vec![0u64; n];
    let mut totals = vec![0u64; n];
    for (i, label) in ids.iter().enumerate() {
        let stats = file
            .per_label
            .get(*label)
            .ok_or_else(|| KbError::Invariant(format!("per_label missing {label}")))?;
        vocab_sizes[i] = stats.vocab_size;
        totals[i] = stats.total;
        let sum: u64 = counts.values().map(|r: &Vec<u64>| r[i]).sum();
        if sum != stats.total {
            return Err(KbError::Invariant(format!(
                "N for {label} is {} but counts sum to {sum}",
                stats.total
            )));
        }
        let distinct = counts.values().filter(|r| r[i] > 0).count() as u64;
        if distinct != stats.vocab_size {
            return Err(KbError::Invariant(format!(
                "V for {label} is {} but {distinct} concepts have nonzero count",
                stats.vocab_size
            )));
        }
    }
    for (lemma, row) in &counts {
        let expect: Vec<T> = score_row(row, &vocab_sizes, &totals);
        for (i, (&got, &want)) in scores[lemma].iter().zip(&expect).enumerate() {
            if (got.as_f64() - want.as_f64()).abs() > 1e-12 {
                return Err(KbError::Invariant(format!(
                    "score of {lemma:?} under {} is {got}, counts give {want}",
                    ids[i]
                )));
            }
        }
    }

    Ok(ConceptKb {
        space,
        config: file.extraction,
        config_fingerprint: file.config_fingerprint,
        counts,
        vocab_sizes,
        totals,
        scores,
    })
}

fn index(ids: &[&str], label: &str, lemma: &str) -> Result<usize, KbError> {
    ids.iter()
        .position(|l| *l == label)
        .ok_or_else(|| KbError::Invariant(format!("concept {lemma:?} has unknown label {label:?}")))
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}
