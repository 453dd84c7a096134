use rand_chacha::ChaCha8Rng;

use crate::nn::Param;
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

pub const TINY_ENCODER_ID: &str = "tiny-bow-v1";

/// Text to fixed-width vector.
pub trait Encoder<T: Scalar> {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<T>;
}

/// Mean of learned token embeddings over the last `max_tokens` tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyEncoder<T: Scalar> {
    pub tokenizer: Tokenizer,
    pub dim: usize,
    pub max_tokens: usize,
    pub emb: Param<T>,
}

impl<T: Scalar> TinyEncoder<T> {
    pub fn new(tokenizer: Tokenizer, dim: usize, max_tokens: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = tokenizer.vocab_size() * dim;
        Self { tokenizer, dim, max_tokens, emb: Param::uniform(n, 0.5, rng) }
    }

    /// Token ids, keeping the tail when the text is too long so the oldest
    /// history goes first.
    pub fn ids(&self, text: &str) -> Vec<u32> {
        let mut ids = self.tokenizer.encode(text);
        if ids.len() > self.max_tokens {
            ids.drain(..ids.len() - self.max_tokens);
        }
        if ids.is_empty() {
            ids.push(self.tokenizer.id(crate::tokenizer::UNK));
        }
        ids
    }

    pub fn forward_ids(&self, ids: &[u32]) -> Vec<T> {
        let mut h = vec![T::zero(); self.dim];
        for &id in ids {
            let row = &self.emb.w[id as usize * self.dim..(id as usize + 1) * self.dim];
            for (a, &b) in h.iter_mut().zip(row) {
                *a += b;
            }
        }
        let n = T::of_usize(ids.len());
        h.iter_mut().for_each(|v| *v /= n);
        h
    }

    pub fn backward_ids(&mut self, ids: &[u32], dh: &[T]) {
        let n = T::of_usize(ids.len());
        for &id in ids {
            let row = &mut self.emb.g[id as usize * self.dim..(id as usize + 1) * self.dim];
            for (g, &d) in row.iter_mut().zip(dh) {
                *g += d / n;
            }
        }
    }
}

impl<T: Scalar> Encoder<T> for TinyEncoder<T> {
    fn id(&self) -> &str {
        TINY_ENCODER_ID
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Vec<T> {
        self.forward_ids(&self.ids(text))
    }
}
