use std::collections::BTreeMap;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::decode::{generate_action, DecodeConfig};
use super::example::{build_training_example, ExampleLimits, GenerationExample};
use super::losses::GenLossConfig;
use super::model::{Arch, Generator};
use super::GenerationError;
use crate::corpus::{CorpusSplits, Instance};
use crate::metrics::{bleu, metric_tokens, perplexity_from_total, rouge, EvalReport, RougeVariant, BLEU_SMOOTHING};
use crate::parallel::par_map;
use crate::nn::{clip_grad_norm, Adam, AdamConfig, LinearSchedule, Param};
use crate::prompting::{render_generation_with, Templates};
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup: f64,
    pub grad_norm: f64,
    pub emb_dim: usize,
    pub hidden: usize,
    pub min_token_count: usize,
    pub seed: u64,
    pub emotion_seed: u64,
    pub arch: Arch,
    pub include_motivation: bool,
    pub max_input_tokens: usize,
    pub max_output_tokens: usize,
}

impl Default for GenHyper {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            batch_size: 32,
            epochs: 30,
            warmup: 0.1,
            grad_norm: 1.0,
            emb_dim: 32,
            hidden: 64,
            min_token_count: 1,
            seed: 0,
            emotion_seed: 1,
            arch: Arch::Causal,
            include_motivation: true,
            max_input_tokens: 200,
            max_output_tokens: 60,
        }
    }
}

impl GenHyper {
    /// Learning rate and epoch budget for the small from-scratch model.
    pub fn desk() -> Self {
        Self { lr: 5e-3, epochs: 5, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: &str| Err(GenerationError::Contract(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.emb_dim == 0 || self.hidden == 0 {
            return bad("batch_size, epochs, emb_dim and hidden must be positive");
        }
        if self.max_input_tokens < 8 || self.max_output_tokens == 0 {
            return bad("max_input_tokens must be at least 8 and max_output_tokens positive");
        }
        if !(0.0..1.0).contains(&self.warmup) || self.grad_norm <= 0.0 {
            return bad("warmup must be in [0, 1) and grad_norm positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenEpochRecord {
    pub epoch: usize,
    pub train_total: f64,
    pub train_lm: f64,
    pub train_kl: f64,
    pub dev_total: f64,
    pub dev_lm: f64,
    pub dev_kl: f64,
    /// Steps where a predicted emotion probability hit the floor.
    pub floored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenTrainReport {
    pub curve: Vec<GenEpochRecord>,
    pub selected_epoch: usize,
    /// Set when training stopped on a non-finite loss; the returned model
    /// is the last good checkpoint.
    pub aborted: Option<String>,
}

fn mean_losses<T: Scalar>(gen: &Generator<T>, data: &[GenerationExample<T>]) -> Result<(f64, f64, f64), GenerationError> {
    let (mut t, mut l, mut k) = (0.0, 0.0, 0.0);
    for ex in data {
        let p = gen.evaluate(ex)?;
        t += p.total.as_f64();
        l += p.lm.as_f64();
        k += p.kl.as_f64();
    }
    let n = data.len().max(1) as f64;
    Ok((t / n, l / n, k / n))
}

/// Trains on the train split and keeps the epoch with the lowest dev total
/// loss.
pub fn train_generator<T: Scalar>(
    splits: &CorpusSplits,
    hyper: &GenHyper,
    loss: GenLossConfig,
    decode: DecodeConfig,
) -> Result<(Generator<T>, GenTrainReport), GenerationError> {
    hyper.validate()?;
    loss.validate()?;
    if splits.train.is_empty() || splits.dev.is_empty() {
        return Err(GenerationError::Contract("train and dev splits must be nonempty".into()));
    }
    let limits = ExampleLimits {
        max_input_tokens: hyper.max_input_tokens,
        max_output_tokens: hyper.max_output_tokens,
        include_motivation: hyper.include_motivation,
        epsilon: loss.epsilon,
    };
    let templates = Templates::default();
    let mut texts = Vec::new();
    for inst in &splits.train {
        let r = render_generation_with(&templates, inst, limits.include_motivation)?;
        texts.push(r.input);
        texts.extend(r.target);
    }
    let tokenizer = Tokenizer::build(texts.iter().map(String::as_str), hyper.min_token_count);
    let mut gen = Generator::new(
        hyper.arch,
        tokenizer,
        hyper.emb_dim,
        hyper.hidden,
        loss,
        limits,
        decode,
        hyper.seed,
        hyper.emotion_seed,
    );
    let build = |data: &[Instance], gen: &Generator<T>| -> Result<Vec<GenerationExample<T>>, GenerationError> {
        data.iter().map(|i| build_training_example(i, &gen.tokenizer, &limits)).collect()
    };
    let train = build(&splits.train, &gen)?;
    let dev = build(&splits.dev, &gen)?;

    let steps_per_epoch = train.len().div_ceil(hyper.batch_size);
    let schedule = LinearSchedule::new(steps_per_epoch * hyper.epochs, hyper.warmup);
    let mut adam = Adam::new(AdamConfig { lr: hyper.lr, ..Default::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::new();
    let mut best: Option<(f64, Generator<T>, usize)> = None;
    let mut aborted = None;
    let mut step = 0;
    'epochs: for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let (mut tt, mut tl, mut tk, mut floored) = (0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(hyper.batch_size) {
            gen.params_mut().into_iter().for_each(Param::zero_grad);
            let w = T::one() / T::of_usize(batch.len());
            for &i in batch {
                match gen.loss_and_grad(&train[i], w) {
                    Ok(p) => {
                        tt += p.total.as_f64();
                        tl += p.lm.as_f64();
                        tk += p.kl.as_f64();
                        floored += usize::from(p.floored);
                    }
                    Err(GenerationError::NonFinite(what)) => {
                        let msg = format!("non-finite {what} at epoch {epoch}, step {step}");
                        if best.is_none() {
                            return Err(GenerationError::Diverged { epoch, step, loss: f64::NAN });
                        }
                        warn!("{msg}; keeping the last good checkpoint");
                        aborted = Some(msg);
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                }
            }
            let mut params = gen.params_mut();
            clip_grad_norm(&mut params, T::of(hyper.grad_norm));
            adam.step(&mut params, schedule.factor(step));
            step += 1;
        }
        let n = train.len() as f64;
        let (dt, dl, dk) = mean_losses(&gen, &dev)?;
        let rec = GenEpochRecord {
            epoch,
            train_total: tt / n,
            train_lm: tl / n,
            train_kl: tk / n,
            dev_total: dt,
            dev_lm: dl,
            dev_kl: dk,
            floored,
        };
        info!(
            "generator epoch {epoch}: train {:.4} (lm {:.4}, kl {:.4}), dev {:.4}",
            rec.train_total, rec.train_lm, rec.train_kl, rec.dev_total
        );
        curve.push(rec);
        if best.as_ref().is_none_or(|(b, _, _)| dt < *b) {
            best = Some((dt, gen.clone(), epoch));
        }
    }
    let (_, selected, selected_epoch) = best.expect("at least one epoch completed");
    Ok((selected, GenTrainReport { curve, selected_epoch, aborted }))
}

/// Teacher-forced perplexity over the action span plus BLEU and ROUGE of
/// decoded actions against the gold action. Instances are decoded on up to
/// `jobs` threads.
pub fn evaluate_generator<T: Scalar>(
    gen: &Generator<T>,
    instances: &[Instance],
    decode: &DecodeConfig,
    jobs: usize,
) -> Result<EvalReport, GenerationError> {
    if instances.is_empty() {
        return Err(GenerationError::Contract("no instances to evaluate".into()));
    }
    let per_instance = par_map(instances, jobs, |inst| -> Result<(f64, usize, String, bool), GenerationError> {
        let ex = build_training_example::<T>(inst, &gen.tokenizer, &gen.limits)?;
        let parts = gen.evaluate(&ex)?;
        let (hyp, tagged) =
            match generate_action(&inst.history, &inst.character, &inst.motivations, gen, decode, None) {
                Ok(g) => (g.action, g.tagged),
                Err(GenerationError::EmptyGeneration) => (String::new(), false),
                Err(e) => return Err(e),
            };
        Ok((parts.nll_sum.as_f64(), parts.n_tokens, hyp, tagged))
    });
    let mut nll = 0.0;
    let mut n_tokens = 0usize;
    let mut hyps = Vec::with_capacity(instances.len());
    let mut refs = Vec::with_capacity(instances.len());
    let mut records = Vec::with_capacity(instances.len());
    for (inst, r) in instances.iter().zip(per_instance) {
        let (nll_sum, n, hyp, tagged) = r?;
        nll += nll_sum;
        n_tokens += n;
        records.push(json!({
            "instance_id": inst.id(),
            "nll_sum": nll_sum,
            "n_tokens": n,
            "hypothesis": hyp,
            "reference": inst.action,
            "tagged": tagged,
        }));
        hyps.push(metric_tokens(&hyp));
        refs.push(metric_tokens(&inst.action));
    }
    let m = |e: crate::metrics::MetricsError| GenerationError::Contract(e.to_string());
    let mut metrics = BTreeMap::new();
    metrics.insert("PPL".to_string(), perplexity_from_total(nll, n_tokens).map_err(m)?);
    for n in [1, 2, 4] {
        metrics.insert(format!("BLEU-{n}"), bleu(&hyps, &refs, n).map_err(m)?);
    }
    for (name, v) in [("ROUGE-1", RougeVariant::One), ("ROUGE-2", RougeVariant::Two), ("ROUGE-L", RougeVariant::L)] {
        metrics.insert(name.to_string(), rouge(&hyps, &refs, v).map_err(m)?);
    }
    Ok(EvalReport {
        task: "cag".into(),
        metrics,
        smoothing: format!(
            "corpus BLEU, zero n-gram precisions replaced by {BLEU_SMOOTHING:e}; ROUGE F-measure averaged over pairs"
        ),
        n_instances: instances.len(),
        config_fingerprint: String::new(),
        records,
    })
}
