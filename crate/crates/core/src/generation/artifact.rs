use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decode::DecodeConfig;
use super::example::ExampleLimits;
use super::losses::GenLossConfig;
use super::model::{Arch, Generator};
use super::GenerationError;
use crate::fingerprint::fingerprint_bytes;
use crate::nn::{params_from_bytes, params_to_bytes};
use crate::prompting::TEMPLATE_VERSION;
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const SIDECAR_FILE: &str = "sidecar.json";
pub const VOCAB_FILE: &str = "vocab.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSidecar {
    pub arch: Arch,
    #[serde(rename = "λ1")]
    pub lambda1: f64,
    #[serde(rename = "λ2")]
    pub lambda2: f64,
    #[serde(rename = "ε")]
    pub epsilon: f64,
    pub kl_direction: String,
    pub template_version: String,
    pub decode_defaults: DecodeConfig,
    pub limits: ExampleLimits,
    pub emb_dim: usize,
    pub hidden: usize,
    pub vocab_size: usize,
    pub weights_sha256: String,
    #[serde(default)]
    pub config_hash: String,
}

fn format_err(e: impl std::fmt::Display) -> GenerationError {
    GenerationError::Format(e.to_string())
}

pub fn save_generator<T: Scalar>(gen: &Generator<T>, dir: &Path, config_hash: &str) -> Result<GeneratorSidecar, GenerationError> {
    fs::create_dir_all(dir)?;
    let blob = params_to_bytes(&gen.params());
    let sidecar = GeneratorSidecar {
        arch: gen.arch,
        lambda1: gen.loss.lambda1,
        lambda2: gen.loss.lambda2,
        epsilon: gen.loss.epsilon,
        kl_direction: "KL(q_smoothed || p)".into(),
        template_version: TEMPLATE_VERSION.into(),
        decode_defaults: gen.decode,
        limits: gen.limits,
        emb_dim: gen.emb_dim,
        hidden: gen.hidden,
        vocab_size: gen.vocab_size(),
        weights_sha256: fingerprint_bytes(&blob),
        config_hash: config_hash.into(),
    };
    fs::write(dir.join(WEIGHTS_FILE), &blob)?;
    fs::write(dir.join(SIDECAR_FILE), serde_json::to_string_pretty(&sidecar).map_err(format_err)? + "\n")?;
    fs::write(dir.join(VOCAB_FILE), serde_json::to_string(&gen.tokenizer).map_err(format_err)? + "\n")?;
    Ok(sidecar)
}

pub fn load_generator<T: Scalar>(dir: &Path) -> Result<(Generator<T>, GeneratorSidecar), GenerationError> {
    let sidecar: GeneratorSidecar =
        serde_json::from_str(&fs::read_to_string(dir.join(SIDECAR_FILE))?).map_err(format_err)?;
    if sidecar.template_version != TEMPLATE_VERSION {
        return Err(GenerationError::Incompatible(format!(
            "template version {} (expected {TEMPLATE_VERSION})",
            sidecar.template_version
        )));
    }
    let tokenizer = serde_json::from_str::<Tokenizer>(&fs::read_to_string(dir.join(VOCAB_FILE))?)
        .map_err(format_err)?
        .reindex();
    if tokenizer.vocab_size() != sidecar.vocab_size {
        return Err(format_err("vocabulary size does not match sidecar"));
    }
    let blob = fs::read(dir.join(WEIGHTS_FILE))?;
    if fingerprint_bytes(&blob) != sidecar.weights_sha256 {
        return Err(format_err("weights checksum mismatch"));
    }
    let loss = GenLossConfig { lambda1: sidecar.lambda1, lambda2: sidecar.lambda2, epsilon: sidecar.epsilon };
    let mut gen = Generator::new(
        sidecar.arch,
        tokenizer,
        sidecar.emb_dim,
        sidecar.hidden,
        loss,
        sidecar.limits,
        sidecar.decode_defaults,
        0,
        0,
    );
    params_from_bytes(&mut gen.params_mut(), &blob).map_err(format_err)?;
    Ok((gen, sidecar))
}
