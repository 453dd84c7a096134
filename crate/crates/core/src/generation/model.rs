use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decode::DecodeConfig;
use super::example::{ExampleLimits, GenerationExample};
use super::losses::{kl_divergence, GenLossConfig};
use super::GenerationError;
use crate::distribution::{log_softmax, softmax};
use crate::labels::EmotionLabel;
use crate::nn::{matvec, matvec_t_acc, outer_acc, Param};
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

/// `Causal` conditions each state on the mean embedding of the whole
/// prefix; `EncDec` on the mean embedding of the source only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    #[serde(rename = "causal")]
    Causal,
    #[serde(rename = "enc-dec")]
    EncDec,
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "causal" => Ok(Self::Causal),
            "enc-dec" | "encdec" => Ok(Self::EncDec),
            other => Err(format!("unknown arch {other:?} (causal or enc-dec)")),
        }
    }
}

/// Conditional LM with an emotion head:
///
/// ```text
/// h_t  = tanh(A ctx_t + B1 e[x_{t-1}] + B2 e[x_{t-2}] + b)
/// p(x_t | x_<t) = softmax(O h_t + c)
/// p(e) = softmax(W_e mean_t(h_t) + b_e), t over the action span
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T: Scalar> {
    pub arch: Arch,
    pub tokenizer: Tokenizer,
    pub emb_dim: usize,
    pub hidden: usize,
    pub emb: Param<T>,
    pub a: Param<T>,
    pub b1: Param<T>,
    pub b2: Param<T>,
    pub bias: Param<T>,
    pub out: Param<T>,
    pub out_b: Param<T>,
    pub emo_w: Param<T>,
    pub emo_b: Param<T>,
    pub loss: GenLossConfig,
    pub limits: ExampleLimits,
    pub decode: DecodeConfig,
}

/// Loss components for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct LossParts<T> {
    pub lm: T,
    pub kl: T,
    pub total: T,
    pub nll_sum: T,
    pub n_tokens: usize,
    pub p_e: Vec<T>,
    pub floored: bool,
}

struct PosCache<T> {
    t: usize,
    ctx: Vec<T>,
    h: Vec<T>,
    probs: Vec<T>,
}

pub(crate) struct DecState<T> {
    sum: Vec<T>,
    count: usize,
    src_mean: Vec<T>,
    p1: u32,
    p2: u32,
}

impl<T: Scalar> Generator<T> {
    /// LM weights draw from `seed`, the emotion head from `emotion_seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        arch: Arch,
        tokenizer: Tokenizer,
        emb_dim: usize,
        hidden: usize,
        loss: GenLossConfig,
        limits: ExampleLimits,
        decode: DecodeConfig,
        seed: u64,
        emotion_seed: u64,
    ) -> Self {
        let v = tokenizer.vocab_size();
        let ne = EmotionLabel::ALL.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut erng = ChaCha8Rng::seed_from_u64(emotion_seed);
        Self {
            arch,
            emb_dim,
            hidden,
            emb: Param::uniform(v * emb_dim, 0.5, &mut rng),
            a: Param::glorot(hidden, emb_dim, &mut rng),
            b1: Param::glorot(hidden, emb_dim, &mut rng),
            b2: Param::glorot(hidden, emb_dim, &mut rng),
            bias: Param::zeros(hidden),
            out: Param::glorot(v, hidden, &mut rng),
            out_b: Param::zeros(v),
            emo_w: Param::glorot(ne, hidden, &mut erng),
            emo_b: Param::zeros(ne),
            tokenizer,
            loss,
            limits,
            decode,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.tokenizer.vocab_size()
    }

    pub fn lm_params(&self) -> Vec<&Param<T>> {
        vec![&self.emb, &self.a, &self.b1, &self.b2, &self.bias, &self.out, &self.out_b]
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.lm_params();
        v.push(&self.emo_w);
        v.push(&self.emo_b);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![
            &mut self.emb,
            &mut self.a,
            &mut self.b1,
            &mut self.b2,
            &mut self.bias,
            &mut self.out,
            &mut self.out_b,
            &mut self.emo_w,
            &mut self.emo_b,
        ]
    }

    fn row(&self, id: u32) -> &[T] {
        let d = self.emb_dim;
        &self.emb.w[id as usize * d..(id as usize + 1) * d]
    }

    fn hidden_state(&self, ctx: &[T], p1: u32, p2: u32) -> Vec<T> {
        let (h, d) = (self.hidden, self.emb_dim);
        let mut pre = self.bias.w.clone();
        let mut tmp = vec![T::zero(); h];
        for (w, x) in [(&self.a.w, ctx), (&self.b1.w, self.row(p1)), (&self.b2.w, self.row(p2))] {
            matvec(w, h, d, x, &mut tmp);
            for (p, &t) in pre.iter_mut().zip(&tmp) {
                *p += t;
            }
        }
        pre.iter_mut().for_each(|v| *v = v.tanh());
        pre
    }

    fn logits(&self, h: &[T]) -> Vec<T> {
        let v = self.vocab_size();
        let mut z = vec![T::zero(); v];
        matvec(&self.out.w, v, self.hidden, h, &mut z);
        for (a, &b) in z.iter_mut().zip(&self.out_b.w) {
            *a += b;
        }
        z
    }

    /// Emotion distribution from the states of an action span.
    pub fn emotion_dist(&self, states: &[Vec<T>]) -> (Vec<T>, Vec<T>) {
        let ne = EmotionLabel::ALL.len();
        let mut hbar = vec![T::zero(); self.hidden];
        for s in states {
            for (a, &b) in hbar.iter_mut().zip(s) {
                *a += b;
            }
        }
        if !states.is_empty() {
            let n = T::of_usize(states.len());
            hbar.iter_mut().for_each(|v| *v /= n);
        }
        let mut z = vec![T::zero(); ne];
        matvec(&self.emo_w.w, ne, self.hidden, &hbar, &mut z);
        for (a, &b) in z.iter_mut().zip(&self.emo_b.w) {
            *a += b;
        }
        (hbar, softmax(&z))
    }

    fn check(&self, ex: &GenerationExample<T>) -> Result<(), GenerationError> {
        if ex.tokens.len() != ex.mask.len() {
            return Err(GenerationError::Contract("mask length differs from token length".into()));
        }
        if ex.mask.first() == Some(&true) {
            return Err(GenerationError::Contract("the first position has no prefix".into()));
        }
        if !ex.mask.iter().any(|&m| m) {
            return Err(GenerationError::EmptyMask);
        }
        let v = self.vocab_size() as u32;
        if ex.tokens.iter().any(|&t| t >= v) {
            return Err(GenerationError::Contract("token id outside the vocabulary".into()));
        }
        if ex.source_len == 0 || ex.source_len > ex.tokens.len() {
            return Err(GenerationError::Contract("bad source length".into()));
        }
        Ok(())
    }

    fn run(&self, ex: &GenerationExample<T>) -> Result<(Vec<PosCache<T>>, LossParts<T>), GenerationError> {
        self.check(ex)?;
        let d = self.emb_dim;
        let pad = self.tokenizer.pad_id();
        let src_mean = self.source_mean(&ex.tokens[..ex.source_len]);
        let mut sum = vec![T::zero(); d];
        let mut caches = Vec::new();
        let mut nll_sum = T::zero();
        for t in 1..ex.tokens.len() {
            for (s, &e) in sum.iter_mut().zip(self.row(ex.tokens[t - 1])) {
                *s += e;
            }
            if !ex.mask[t] {
                continue;
            }
            let ctx = match self.arch {
                Arch::Causal => sum.iter().map(|&s| s / T::of_usize(t)).collect(),
                Arch::EncDec => src_mean.clone(),
            };
            let p1 = ex.tokens[t - 1];
            let p2 = if t >= 2 { ex.tokens[t - 2] } else { pad };
            let h = self.hidden_state(&ctx, p1, p2);
            let lp = log_softmax(&self.logits(&h));
            nll_sum -= lp[ex.tokens[t] as usize];
            caches.push(PosCache { t, ctx, h, probs: lp.iter().map(|v| v.exp()).collect() });
        }
        let n = caches.len();
        let states: Vec<Vec<T>> = caches.iter().map(|c| c.h.clone()).collect();
        let (_, p_e) = self.emotion_dist(&states);
        let kl = kl_divergence(&ex.q, &p_e);
        let lm = nll_sum / T::of_usize(n);
        let total = T::of(self.loss.lambda1) * lm + T::of(self.loss.lambda2) * kl.value;
        if !total.is_finite() {
            return Err(GenerationError::NonFinite("loss"));
        }
        Ok((caches, LossParts { lm, kl: kl.value, total, nll_sum, n_tokens: n, p_e, floored: kl.floored }))
    }

    fn source_mean(&self, source: &[u32]) -> Vec<T> {
        let mut m = vec![T::zero(); self.emb_dim];
        for &id in source {
            for (a, &b) in m.iter_mut().zip(self.row(id)) {
                *a += b;
            }
        }
        let n = T::of_usize(source.len().max(1));
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Teacher-forced loss without gradients.
    pub fn evaluate(&self, ex: &GenerationExample<T>) -> Result<LossParts<T>, GenerationError> {
        Ok(self.run(ex)?.1)
    }

    /// Accumulates `weight` times the gradient of the total loss.
    pub fn loss_and_grad(&mut self, ex: &GenerationExample<T>, weight: T) -> Result<LossParts<T>, GenerationError> {
        let (caches, parts) = self.run(ex)?;
        let (h, d, v) = (self.hidden, self.emb_dim, self.vocab_size());
        let ne = EmotionLabel::ALL.len();
        let n = T::of_usize(caches.len());
        let l1 = weight * T::of(self.loss.lambda1) / n;
        let l2 = weight * T::of(self.loss.lambda2);

        // emotion head: d KL(q || softmax(z)) / dz = p - q
        let states: Vec<Vec<T>> = caches.iter().map(|c| c.h.clone()).collect();
        let (hbar, p_e) = self.emotion_dist(&states);
        let dz: Vec<T> = p_e.iter().zip(&ex.q).map(|(&p, &q)| l2 * (p - q)).collect();
        outer_acc(&mut self.emo_w.g, ne, h, &dz, &hbar);
        for (g, &x) in self.emo_b.g.iter_mut().zip(&dz) {
            *g += x;
        }
        let mut dhbar = vec![T::zero(); h];
        matvec_t_acc(&self.emo_w.w, ne, h, &dz, &mut dhbar);
        dhbar.iter_mut().for_each(|x| *x /= n);

        let pad = self.tokenizer.pad_id();
        let mut dctx_at = vec![None; ex.tokens.len()];
        let mut dsrc = vec![T::zero(); d];
        for c in &caches {
            let mut dlogits = c.probs.clone();
            dlogits[ex.tokens[c.t] as usize] -= T::one();
            dlogits.iter_mut().for_each(|x| *x *= l1);
            outer_acc(&mut self.out.g, v, h, &dlogits, &c.h);
            for (g, &x) in self.out_b.g.iter_mut().zip(&dlogits) {
                *g += x;
            }
            let mut dh = dhbar.clone();
            matvec_t_acc(&self.out.w, v, h, &dlogits, &mut dh);
            let dpre: Vec<T> = dh.iter().zip(&c.h).map(|(&g, &a)| g * (T::one() - a * a)).collect();
            let p1 = ex.tokens[c.t - 1];
            let p2 = if c.t >= 2 { ex.tokens[c.t - 2] } else { pad };
            outer_acc(&mut self.a.g, h, d, &dpre, &c.ctx);
            let x1 = self.row(p1).to_vec();
            let x2 = self.row(p2).to_vec();
            outer_acc(&mut self.b1.g, h, d, &dpre, &x1);
            outer_acc(&mut self.b2.g, h, d, &dpre, &x2);
            for (g, &x) in self.bias.g.iter_mut().zip(&dpre) {
                *g += x;
            }
            for (id, w) in [(p1, &self.b1.w), (p2, &self.b2.w)] {
                let row = &mut self.emb.g[id as usize * d..(id as usize + 1) * d];
                matvec_t_acc(w, h, d, &dpre, row);
            }
            let mut dctx = vec![T::zero(); d];
            matvec_t_acc(&self.a.w, h, d, &dpre, &mut dctx);
            match self.arch {
                Arch::Causal => dctx_at[c.t] = Some(dctx),
                Arch::EncDec => crate::nn::add_assign(&mut dsrc, &dctx),
            }
        }
        match self.arch {
            Arch::Causal => {
                // position j receives dctx_t / t from every masked t > j
                let mut acc = vec![T::zero(); d];
                for j in (0..ex.tokens.len()).rev() {
                    if let Some(Some(dc)) = dctx_at.get(j + 1) {
                        let t = T::of_usize(j + 1);
                        for (a, &x) in acc.iter_mut().zip(dc) {
                            *a += x / t;
                        }
                    }
                    let id = ex.tokens[j] as usize;
                    crate::nn::add_assign(&mut self.emb.g[id * d..(id + 1) * d], &acc);
                }
            }
            Arch::EncDec => {
                let k = T::of_usize(ex.source_len);
                dsrc.iter_mut().for_each(|x| *x /= k);
                for &id in &ex.tokens[..ex.source_len] {
                    let id = id as usize;
                    crate::nn::add_assign(&mut self.emb.g[id * d..(id + 1) * d], &dsrc);
                }
            }
        }
        Ok(parts)
    }

    pub(crate) fn start(&self, source: &[u32]) -> DecState<T> {
        let mut st = DecState {
            sum: vec![T::zero(); self.emb_dim],
            count: 0,
            src_mean: self.source_mean(source),
            p1: self.tokenizer.pad_id(),
            p2: self.tokenizer.pad_id(),
        };
        for &t in source {
            self.push(&mut st, t);
        }
        st
    }

    pub(crate) fn push(&self, st: &mut DecState<T>, tok: u32) {
        for (s, &e) in st.sum.iter_mut().zip(self.row(tok)) {
            *s += e;
        }
        st.count += 1;
        st.p2 = st.p1;
        st.p1 = tok;
    }

    /// State and next-token log-probabilities after the current prefix.
    pub(crate) fn step(&self, st: &DecState<T>) -> (Vec<T>, Vec<T>) {
        let ctx: Vec<T> = match self.arch {
            Arch::Causal => st.sum.iter().map(|&s| s / T::of_usize(st.count.max(1))).collect(),
            Arch::EncDec => st.src_mean.clone(),
        };
        let h = self.hidden_state(&ctx, st.p1, st.p2);
        let lp = log_softmax(&self.logits(&h));
        (h, lp)
    }
}

impl<T: Scalar> Clone for DecState<T> {
    fn clone(&self) -> Self {
        Self { sum: self.sum.clone(), count: self.count, src_mean: self.src_mean.clone(), p1: self.p1, p2: self.p2 }
    }
}
