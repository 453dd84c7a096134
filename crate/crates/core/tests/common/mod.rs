#![allow(dead_code)]

use comma_core::concept_kb::{build_kb, ExtractionConfig};
use comma_core::corpus::synth::{synth_release, SynthConfig};
use comma_core::corpus::{instances_from_records, records_from_json, split_corpus, CorpusSplits, ParseConfig, DEFAULT_AGREEMENT_MIN};
use comma_core::{ConceptKb, LabelSpace};

/// Synthetic corpus with roughly `n_stories * 4` instances.
pub fn synth_splits(n_stories: usize, seed: u64) -> CorpusSplits {
    let release = synth_release(&SynthConfig { n_stories, seed, ..Default::default() });
    let records = records_from_json(&release).unwrap();
    let out = instances_from_records(records, &ParseConfig::default(), DEFAULT_AGREEMENT_MIN).unwrap();
    split_corpus(&out.instances, [0.7, 0.15, 0.15], seed).unwrap()
}

pub fn kb_for(splits: &CorpusSplits, space: LabelSpace) -> ConceptKb {
    let mut cfg = ExtractionConfig::default();
    cfg.fit_high_frequency(splits.train.iter().map(|i| i.action.as_str()));
    build_kb(&splits.train, space, &cfg).unwrap()
}
