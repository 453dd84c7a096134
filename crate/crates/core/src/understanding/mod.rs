//! Emotion and motivation understanding: a sentence encoder feeds a two-layer
//! classifier head, whose label distribution is combined with concept
//! knowledge-base votes before the multi-label decision.

mod baselines;
mod checkpoint;
mod encoder;
mod head;
mod matrix;
mod model;
mod voting;

use thiserror::Error;

pub use baselines::{kb_only_prf, majority_baseline_prf, majority_label, uniform_random_expected_f1};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointSidecar};
pub use encoder::{Encoder, TinyEncoder, TINY_ENCODER_ID};
pub use head::{classify, ClassifierHead, HeadTrace};
pub use matrix::{joint_matrix, JointMatrix};
pub use model::{
    decide, predict, train_understanding, tune_threshold, ConceptVote, EpochRecord, Prediction,
    PredictionRecord, TrainReport, UnderstandingHyper, UnderstandingModel,
};
pub use voting::{pool, vote, Pool, Voter, VotingConfig, VotingMode};

#[derive(Debug, Error)]
pub enum UnderstandingError {
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{0}")]
    Contract(String),
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
    #[error("incompatible artifact: {0}")]
    Incompatible(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<crate::prompting::PromptError> for UnderstandingError {
    fn from(e: crate::prompting::PromptError) -> Self {
        Self::Contract(e.to_string())
    }
}

impl From<crate::distribution::DistributionError> for UnderstandingError {
    fn from(e: crate::distribution::DistributionError) -> Self {
        Self::Contract(e.to_string())
    }
}
