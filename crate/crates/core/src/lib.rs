//! Toolkit for modelling motivations, emotions and actions in everyday
//! stories: corpus alignment, concept knowledge bases, voting classifiers for
//! emotion and motivation understanding, an emotion-supervised action
//! generator, and the evaluation metrics around them.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the scalar for the common cases.

pub mod concept_kb;
pub mod corpus;
pub mod distribution;
pub mod fingerprint;
pub mod generation;
pub mod labels;
pub mod metrics;
pub mod nn;
pub mod parallel;
pub mod prompting;
pub mod scalar;
pub mod tokenizer;
pub mod understanding;

pub use distribution::LabelDistribution;
pub use labels::{EmotionLabel, LabelSpace, MotivationLabel, Task};
pub use scalar::Scalar;

pub type Distribution = LabelDistribution<f64>;
pub type Distribution32 = LabelDistribution<f32>;
pub type ConceptKb = concept_kb::ConceptKb<f64>;
pub type ConceptKb32 = concept_kb::ConceptKb<f32>;
pub type UnderstandingModel = understanding::UnderstandingModel<f64>;
pub type UnderstandingModel32 = understanding::UnderstandingModel<f32>;
pub type Generator = generation::Generator<f64>;
pub type Generator32 = generation::Generator<f32>;
