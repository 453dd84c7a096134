use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::example::encode_source;
use super::model::{DecState, Generator};
use super::GenerationError;
use crate::corpus::Instance;
use crate::distribution::LabelDistribution;
use crate::labels::{EmotionLabel, MotivationLabel};
use crate::prompting::{parse_generated_action, ACT_CLOSE, ACT_OPEN, SPECIAL_TAGS};
use crate::scalar::Scalar;
use crate::tokenizer::{BOS, EOS, PAD, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Greedy,
    Beam,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "beam" => Ok(Self::Beam),
            other => Err(format!("unknown decoding strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub beam_width: usize,
    /// Target tokens including both action tags.
    pub max_output_tokens: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self { strategy: Strategy::Beam, beam_width: 4, max_output_tokens: 60 }
    }
}

impl DecodeConfig {
    pub fn greedy() -> Self {
        Self { strategy: Strategy::Greedy, ..Self::default() }
    }
}

/// A decoded target sequence, `[act]` first.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub tokens: Vec<u32>,
    pub text: String,
    pub log_prob: f64,
    pub p_e: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedAction<T: Scalar> {
    pub action: String,
    pub tagged: bool,
    pub p_e: LabelDistribution<T>,
    pub log_prob: f64,
    pub n_candidates: usize,
}

struct Hyp<T: Scalar> {
    tokens: Vec<u32>,
    state: DecState<T>,
    states: Vec<Vec<T>>,
    log_prob: f64,
}

fn banned<T: Scalar>(gen: &Generator<T>) -> BTreeSet<u32> {
    SPECIAL_TAGS
        .iter()
        .filter(|t| **t != ACT_CLOSE)
        .chain([PAD, BOS, EOS, UNK].iter())
        .map(|t| gen.tokenizer.id(t))
        .collect()
}

fn finish<T: Scalar>(gen: &Generator<T>, h: Hyp<T>) -> Candidate<T> {
    let (_, p_e) = gen.emotion_dist(&h.states);
    Candidate { text: gen.tokenizer.decode(&h.tokens), tokens: h.tokens, log_prob: h.log_prob, p_e }
}

fn length_normalized<T: Scalar>(c: &Candidate<T>) -> f64 {
    c.log_prob / (c.tokens.len().saturating_sub(1).max(1)) as f64
}

/// Greedy output, or the finished beam hypotheses ranked by mean token
/// log-probability.
pub fn decode_candidates<T: Scalar>(gen: &Generator<T>, source: &[u32], cfg: &DecodeConfig) -> Vec<Candidate<T>> {
    let act = gen.tokenizer.id(ACT_OPEN);
    let close = gen.tokenizer.id(ACT_CLOSE);
    let ban = banned(gen);
    let mut state = gen.start(source);
    let (h0, lp0) = gen.step(&state);
    gen.push(&mut state, act);
    let root = Hyp { tokens: vec![act], state, states: vec![h0], log_prob: lp0[act as usize].as_f64() };
    let width = match cfg.strategy {
        Strategy::Greedy => 1,
        Strategy::Beam => cfg.beam_width.max(1),
    };
    let mut live = vec![root];
    let mut done: Vec<Hyp<T>> = Vec::new();
    while !live.is_empty() && done.len() < width {
        let mut expanded: Vec<(f64, usize, u32, Vec<T>)> = Vec::new();
        for (bi, hyp) in live.iter().enumerate() {
            let (h, lp) = gen.step(&hyp.state);
            let mut options: Vec<(u32, f64)> = lp
                .iter()
                .enumerate()
                .filter(|(i, _)| !ban.contains(&(*i as u32)))
                .map(|(i, v)| (i as u32, v.as_f64()))
                .collect();
            options.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for &(tok, v) in options.iter().take(width) {
                expanded.push((hyp.log_prob + v, bi, tok, h.clone()));
            }
        }
        expanded.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        expanded.truncate(width - done.len());
        let mut next = Vec::new();
        for (lp, bi, tok, h) in expanded {
            let parent = &live[bi];
            let mut hyp = Hyp {
                tokens: parent.tokens.clone(),
                state: parent.state.clone(),
                states: parent.states.clone(),
                log_prob: lp,
            };
            hyp.tokens.push(tok);
            hyp.states.push(h);
            gen.push(&mut hyp.state, tok);
            if tok == close || hyp.tokens.len() >= cfg.max_output_tokens {
                done.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        live = next;
    }
    let mut out: Vec<Candidate<T>> = done.into_iter().map(|h| finish(gen, h)).collect();
    out.sort_by(|a, b| length_normalized(b).total_cmp(&length_normalized(a)).then(a.tokens.cmp(&b.tokens)));
    out
}

/// Generates an action for the context. With `desired`, the candidate with
/// the highest predicted probability of that emotion is returned.
pub fn generate_action<T: Scalar>(
    history: &[String],
    character: &str,
    motivations: &BTreeSet<MotivationLabel>,
    gen: &Generator<T>,
    cfg: &DecodeConfig,
    desired: Option<EmotionLabel>,
) -> Result<GeneratedAction<T>, GenerationError> {
    let inst = Instance {
        story_id: String::new(),
        line_idx: 0,
        character: character.to_string(),
        history: history.to_vec(),
        action: String::new(),
        motivations: motivations.clone(),
        emotions: BTreeSet::new(),
    };
    let (source, _) = encode_source(&inst, &gen.tokenizer, &gen.limits)?;
    let candidates = decode_candidates(gen, &source, cfg);
    let n_candidates = candidates.len();
    let mut parsed: Vec<_> = candidates
        .into_iter()
        .filter_map(|c| parse_generated_action(&c.text).ok().map(|p| (p, c)))
        .collect();
    if parsed.is_empty() {
        return Err(GenerationError::EmptyGeneration);
    }
    let pick = match desired {
        Some(e) => (0..parsed.len())
            .max_by(|&a, &b| {
                parsed[a].1.p_e[e.index()]
                    .partial_cmp(&parsed[b].1.p_e[e.index()])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .expect("nonempty"),
        None => 0,
    };
    let (p, c) = parsed.swap_remove(pick);
    Ok(GeneratedAction {
        action: p.action,
        tagged: p.tagged,
        p_e: LabelDistribution::new(c.p_e).map_err(|e| GenerationError::Contract(e.to_string()))?,
        log_prob: c.log_prob,
        n_candidates,
    })
}
