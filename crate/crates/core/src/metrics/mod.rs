//! Evaluation statistics: micro-averaged P/R/F1, perplexity, BLEU, ROUGE,
//! Fleiss' kappa, the sign test and the human A/B evaluation round trip.

mod agreement;
mod classification;
pub mod human;
mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{fleiss_kappa, sign_test};
pub use classification::{micro_prf, Prf};
pub use text::{
    bleu, metric_tokens, perplexity, perplexity_from_total, rouge, RougeVariant, BLEU_SMOOTHING,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0}: no inputs")]
    Empty(&'static str),
    #[error("unsupported n-gram order {0}")]
    Order(usize),
    #[error("subject {subject}: ratings sum to {got}, expected {expected}")]
    RowSum { subject: usize, got: usize, expected: usize },
    #[error("statistic undefined: {0}")]
    Undefined(&'static str),
    #[error("row {row}: {message}")]
    Validation { row: String, message: String },
    #[error("blinding key mismatch for row {0}")]
    Integrity(String),
    #[error("{0}")]
    Io(String),
}

/// Machine-readable evaluation output. Values are raw, in [0, 1] except
/// perplexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metrics: BTreeMap<String, f64>,
    pub smoothing: String,
    pub n_instances: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub config_fingerprint: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<serde_json::Value>,
}

impl EvalReport {
    /// Metric table scaled by 100, except perplexity.
    pub fn percent_table(&self) -> BTreeMap<String, f64> {
        self.metrics
            .iter()
            .map(|(k, &v)| (k.clone(), if k == "PPL" { v } else { v * 100.0 }))
            .collect()
    }
}
