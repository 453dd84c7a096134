use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::losses::smooth;
use super::GenerationError;
use crate::corpus::Instance;
use crate::labels::{EmotionLabel, MotivationLabel};
use crate::prompting::{render_generation_with, Templates, ACT_CLOSE};
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

/// Length limits and template switches shared by training and decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleLimits {
    pub max_input_tokens: usize,
    pub max_output_tokens: usize,
    /// False drops the motivation block from the input (ablation).
    pub include_motivation: bool,
    pub epsilon: f64,
}

impl Default for ExampleLimits {
    fn default() -> Self {
        Self { max_input_tokens: 200, max_output_tokens: 60, include_motivation: true, epsilon: 0.1 }
    }
}

/// Tokens `<bos> input target`; the mask covers the target, tags included.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationExample<T: Scalar> {
    pub instance_id: String,
    pub tokens: Vec<u32>,
    pub mask: Vec<bool>,
    /// Smoothed normalized indicator of the gold emotions.
    pub q: Vec<T>,
    /// Number of leading positions that are `<bos>` plus input.
    pub source_len: usize,
    pub character: String,
    pub motivations: BTreeSet<MotivationLabel>,
    pub dropped_history: usize,
    pub truncated_target: bool,
}

/// `<bos>` plus the tokenized input, dropping history from the oldest line
/// until it fits. Returns the number of dropped lines.
pub fn encode_source(
    inst: &Instance,
    tokenizer: &Tokenizer,
    limits: &ExampleLimits,
) -> Result<(Vec<u32>, usize), GenerationError> {
    let templates = Templates::default();
    let mut view = inst.clone();
    let mut dropped = 0;
    loop {
        let r = render_generation_with(&templates, &view, limits.include_motivation)?;
        let mut ids = vec![tokenizer.bos_id()];
        ids.extend(tokenizer.encode(&r.input));
        if ids.len() <= limits.max_input_tokens || view.history.is_empty() {
            if ids.len() > limits.max_input_tokens {
                let cut = ids.len() - limits.max_input_tokens;
                ids.drain(1..1 + cut);
            }
            return Ok((ids, dropped));
        }
        view.history.remove(0);
        dropped += 1;
    }
}

pub(crate) fn emotion_target<T: Scalar>(emotions: &BTreeSet<EmotionLabel>, eps: f64) -> Vec<T> {
    let mut q = vec![T::zero(); EmotionLabel::ALL.len()];
    if !emotions.is_empty() {
        let w = T::one() / T::of_usize(emotions.len());
        for e in emotions {
            q[e.index()] = w;
        }
    }
    smooth(&q, eps)
}

pub fn build_training_example<T: Scalar>(
    inst: &Instance,
    tokenizer: &Tokenizer,
    limits: &ExampleLimits,
) -> Result<GenerationExample<T>, GenerationError> {
    if inst.action.trim().is_empty() {
        return Err(GenerationError::Contract("missing required field `action`".into()));
    }
    if inst.emotions.is_empty() {
        return Err(GenerationError::Contract("missing required field `emotions`".into()));
    }
    let (mut tokens, dropped_history) = encode_source(inst, tokenizer, limits)?;
    let source_len = tokens.len();
    let rendering = render_generation_with(&Templates::default(), inst, limits.include_motivation)?;
    let mut target = tokenizer.encode(rendering.target.as_deref().unwrap_or_default());
    let truncated_target = target.len() > limits.max_output_tokens;
    if truncated_target {
        target.truncate(limits.max_output_tokens.max(2) - 1);
        target.push(tokenizer.id(ACT_CLOSE));
    }
    let mut mask = vec![false; source_len];
    mask.extend(std::iter::repeat_n(true, target.len()));
    tokens.extend(target);
    Ok(GenerationExample {
        instance_id: inst.id(),
        tokens,
        mask,
        q: emotion_target(&inst.emotions, limits.epsilon),
        source_len,
        character: inst.character.clone(),
        motivations: inst.motivations.clone(),
        dropped_history,
        truncated_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::ACT_OPEN;

    fn inst(history: usize, emotions: &[EmotionLabel]) -> Instance {
        Instance {
            story_id: "s".into(),
            line_idx: history,
            character: "Kim".into(),
            history: (0..history).map(|i| format!("Kim did thing number {i} today.")).collect(),
            action: "Kim went home.".into(),
            motivations: BTreeSet::from([MotivationLabel::Love]),
            emotions: emotions.iter().copied().collect(),
        }
    }

    fn tok() -> Tokenizer {
        Tokenizer::build(["Kim did thing number 0 1 2 3 4 5 today went home has love motivation history actions are 's and ."], 1)
    }

    #[test]
    fn mask_covers_target() {
        let limits = ExampleLimits { epsilon: 0.0, ..Default::default() };
        let ex: GenerationExample<f64> = build_training_example(&inst(2, &[EmotionLabel::Joy]), &tok(), &limits).unwrap();
        let t = tok();
        let masked: Vec<u32> = ex.tokens.iter().zip(&ex.mask).filter(|(_, &m)| m).map(|(&x, _)| x).collect();
        assert_eq!(t.decode(&masked), "[act] kim went home. [/act]");
        assert_eq!(masked[0], t.id(ACT_OPEN));
        assert_eq!(ex.tokens[0], t.bos_id());
        assert_eq!(ex.q[EmotionLabel::Joy.index()], 1.0);
        assert_eq!(ex.q.iter().sum::<f64>(), 1.0);
        let two: GenerationExample<f64> =
            build_training_example(&inst(0, &[EmotionLabel::Joy, EmotionLabel::Trust]), &t, &limits).unwrap();
        assert_eq!(two.q[EmotionLabel::Joy.index()], 0.5);
        assert_eq!(two.q[EmotionLabel::Trust.index()], 0.5);
    }

    #[test]
    fn drops_oldest_history_first() {
        let limits = ExampleLimits { max_input_tokens: 40, ..Default::default() };
        let ex: GenerationExample<f64> = build_training_example(&inst(6, &[EmotionLabel::Joy]), &tok(), &limits).unwrap();
        assert!(ex.dropped_history > 0);
        assert!(ex.source_len <= 40);
        let text = tok().decode(&ex.tokens[..ex.source_len]);
        assert!(text.contains(" 5 "), "{text}");
        assert!(!text.contains(" 0 "), "{text}");
    }

    #[test]
    fn truncates_long_targets() {
        let limits = ExampleLimits { max_output_tokens: 4, ..Default::default() };
        let mut i = inst(0, &[EmotionLabel::Joy]);
        i.action = "Kim went home and went home and went home.".into();
        let ex: GenerationExample<f64> = build_training_example(&i, &tok(), &limits).unwrap();
        assert!(ex.truncated_target);
        assert_eq!(ex.mask.iter().filter(|&&m| m).count(), 4);
        assert_eq!(*ex.tokens.last().unwrap(), tok().id(ACT_CLOSE));
    }
}
