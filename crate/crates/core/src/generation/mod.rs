//! Conditioned action generation: a small conditional language model trained
//! on the action span, with an emotion head supervised by KL divergence, plus
//! greedy and beam decoding.

mod artifact;
mod decode;
mod example;
mod losses;
mod model;
mod train;

use thiserror::Error;

pub use artifact::{load_generator, save_generator, GeneratorSidecar};
pub use decode::{decode_candidates, generate_action, Candidate, DecodeConfig, GeneratedAction, Strategy};
pub use example::{build_training_example, encode_source, ExampleLimits, GenerationExample};
pub use losses::{kl_divergence, kl_loss, lm_loss, smooth, total_loss, GenLossConfig, KlLoss, KL_FLOOR};
pub use model::{Arch, Generator, LossParts};
pub use train::{evaluate_generator, train_generator, GenEpochRecord, GenHyper, GenTrainReport};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("{0}")]
    Contract(String),
    #[error("loss mask selects no tokens")]
    EmptyMask,
    #[error("generation produced an empty action")]
    EmptyGeneration,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
    #[error("incompatible artifact: {0}")]
    Incompatible(String),
    #[error("artifact format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<crate::prompting::PromptError> for GenerationError {
    fn from(e: crate::prompting::PromptError) -> Self {
        match e {
            crate::prompting::PromptError::EmptyGeneration => Self::EmptyGeneration,
            other => Self::Contract(other.to_string()),
        }
    }
}
