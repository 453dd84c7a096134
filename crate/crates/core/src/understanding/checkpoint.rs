use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierHead, TinyEncoder, UnderstandingError, UnderstandingModel, Voter, VotingConfig, TINY_ENCODER_ID};
use crate::fingerprint::fingerprint_bytes;
use crate::labels::{LabelSpace, Task};
use crate::nn::{params_from_bytes, params_to_bytes};
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const SIDECAR_FILE: &str = "sidecar.json";
pub const VOCAB_FILE: &str = "vocab.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSidecar {
    pub task: Task,
    pub label_space: Vec<String>,
    pub voting: VotingConfig,
    pub threshold: f64,
    pub encoder_id: String,
    pub kb_fingerprint: String,
    pub dev_metrics: BTreeMap<String, f64>,
    pub hidden: usize,
    pub max_input_tokens: usize,
    pub vocab_size: usize,
    pub weights_sha256: String,
    #[serde(default)]
    pub config_hash: String,
}

fn format_err(e: impl std::fmt::Display) -> UnderstandingError {
    UnderstandingError::Format(e.to_string())
}

/// Writes weights, sidecar and vocabulary into `dir`.
pub fn save_checkpoint<T: Scalar>(
    model: &UnderstandingModel<T>,
    dir: &Path,
    config_hash: &str,
) -> Result<CheckpointSidecar, UnderstandingError> {
    fs::create_dir_all(dir)?;
    let blob = params_to_bytes(&model.params());
    let sidecar = CheckpointSidecar {
        task: model.task,
        label_space: model.space.ids().into_iter().map(String::from).collect(),
        voting: model.voter.config,
        threshold: model.threshold.as_f64(),
        encoder_id: TINY_ENCODER_ID.to_string(),
        kb_fingerprint: model.kb_fingerprint.clone(),
        dev_metrics: model.dev_metrics.clone(),
        hidden: model.encoder.dim,
        max_input_tokens: model.encoder.max_tokens,
        vocab_size: model.encoder.tokenizer.vocab_size(),
        weights_sha256: fingerprint_bytes(&blob),
        config_hash: config_hash.to_string(),
    };
    fs::write(dir.join(WEIGHTS_FILE), &blob)?;
    fs::write(dir.join(SIDECAR_FILE), serde_json::to_string_pretty(&sidecar).map_err(format_err)? + "\n")?;
    fs::write(dir.join(VOCAB_FILE), serde_json::to_string(&model.encoder.tokenizer).map_err(format_err)? + "\n")?;
    Ok(sidecar)
}

/// Loads a checkpoint, refusing a knowledge-base fingerprint other than
/// `expected_kb` when one is given.
pub fn load_checkpoint<T: Scalar>(
    dir: &Path,
    expected_kb: Option<&str>,
) -> Result<(UnderstandingModel<T>, CheckpointSidecar), UnderstandingError> {
    let sidecar: CheckpointSidecar =
        serde_json::from_str(&fs::read_to_string(dir.join(SIDECAR_FILE))?).map_err(format_err)?;
    if let Some(kb) = expected_kb {
        if kb != sidecar.kb_fingerprint {
            return Err(UnderstandingError::Incompatible(format!(
                "checkpoint was trained with knowledge base {}, got {}",
                sidecar.kb_fingerprint, kb
            )));
        }
    }
    if sidecar.encoder_id != TINY_ENCODER_ID {
        return Err(UnderstandingError::Incompatible(format!("unknown encoder {}", sidecar.encoder_id)));
    }
    let space: LabelSpace = sidecar
        .task
        .target_space()
        .ok_or_else(|| format_err("checkpoint task has no label space"))?;
    if sidecar.label_space != space.ids() {
        return Err(format_err("label space does not match task"));
    }
    let tokenizer: Tokenizer = serde_json::from_str::<Tokenizer>(&fs::read_to_string(dir.join(VOCAB_FILE))?)
        .map_err(format_err)?
        .reindex();
    if tokenizer.vocab_size() != sidecar.vocab_size {
        return Err(format_err("vocabulary size does not match sidecar"));
    }
    let blob = fs::read(dir.join(WEIGHTS_FILE))?;
    if fingerprint_bytes(&blob) != sidecar.weights_sha256 {
        return Err(format_err("weights checksum mismatch"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = UnderstandingModel {
        task: sidecar.task,
        space,
        encoder: TinyEncoder::new(tokenizer, sidecar.hidden, sidecar.max_input_tokens, &mut rng),
        head: ClassifierHead::new(sidecar.hidden, space.len(), &mut rng),
        voter: Voter::new(sidecar.voting, space.len(), &mut rng),
        threshold: T::of(sidecar.threshold),
        kb_fingerprint: sidecar.kb_fingerprint.clone(),
        dev_metrics: sidecar.dev_metrics.clone(),
    };
    params_from_bytes(&mut model.params_for_load(), &blob).map_err(format_err)?;
    Ok((model, sidecar))
}
