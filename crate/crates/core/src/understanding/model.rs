use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierHead, TinyEncoder, UnderstandingError, Voter, VotingConfig};
use crate::concept_kb::{labels_for, query_kb, ConceptKb};
use crate::corpus::{CorpusSplits, Instance};
use crate::distribution::{argmax, LabelDistribution};
use crate::labels::{LabelSpace, Task};
use crate::metrics::{micro_prf, Prf};
use crate::nn::{clip_grad_norm, softmax_backward, Adam, AdamConfig, LinearSchedule, Param};
use crate::prompting::render_understanding_prompt;
use crate::scalar::Scalar;
use crate::tokenizer::Tokenizer;

/// Floor under `P_f` inside the log of the loss.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderstandingHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup: f64,
    pub grad_norm: f64,
    pub max_input_tokens: usize,
    pub hidden: usize,
    pub min_token_count: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub threshold_grid: Vec<f64>,
}

impl Default for UnderstandingHyper {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            batch_size: 32,
            epochs: 5,
            warmup: 0.1,
            grad_norm: 1.0,
            max_input_tokens: 200,
            hidden: 64,
            min_token_count: 1,
            weight_decay: 0.0,
            seed: 0,
            threshold_grid: (1..20).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

impl UnderstandingHyper {
    /// Learning rate sized for the small from-scratch encoder.
    pub fn desk() -> Self {
        Self { lr: 1e-2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), UnderstandingError> {
        let bad = |m: &str| Err(UnderstandingError::Contract(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.hidden == 0 || self.max_input_tokens == 0 {
            return bad("batch_size, epochs, hidden and max_input_tokens must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return bad("warmup must be in [0, 1)");
        }
        if self.grad_norm <= 0.0 {
            return bad("grad_norm must be positive");
        }
        if self.threshold_grid.is_empty() || self.threshold_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return bad("threshold grid values must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnderstandingModel<T: Scalar> {
    pub task: Task,
    pub space: LabelSpace,
    pub encoder: TinyEncoder<T>,
    pub head: ClassifierHead<T>,
    pub voter: Voter<T>,
    pub threshold: T,
    pub kb_fingerprint: String,
    pub dev_metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_micro_f1: f64,
    pub dev_threshold: f64,
    pub alpha: f64,
    /// Largest global gradient norm seen before clipping.
    pub max_grad_norm: f64,
    /// Largest norm after clipping; never above the configured bound.
    pub max_clipped_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub steps: usize,
}

struct Prepared<T> {
    ids: Vec<u32>,
    gold: BTreeSet<usize>,
    q: Vec<T>,
    concepts: Vec<Vec<T>>,
}

pub(crate) fn check_task<T: Scalar>(task: Task, kb: &ConceptKb<T>) -> Result<LabelSpace, UnderstandingError> {
    let space = task
        .target_space()
        .ok_or_else(|| UnderstandingError::Contract(format!("task {} is not an understanding task", task.id())))?;
    if kb.space() != space {
        return Err(UnderstandingError::Incompatible(format!(
            "task {} needs a {} knowledge base, got {}",
            task.id(),
            space.id(),
            kb.space().id()
        )));
    }
    Ok(space)
}

fn prepare<T: Scalar>(
    inst: &Instance,
    task: Task,
    space: LabelSpace,
    encoder: &TinyEncoder<T>,
    kb: &ConceptKb<T>,
) -> Result<Prepared<T>, UnderstandingError> {
    let prompt = render_understanding_prompt(inst, task)?;
    let gold: BTreeSet<usize> = labels_for(inst, space).into_iter().collect();
    let mut q = vec![T::zero(); space.len()];
    if !gold.is_empty() {
        let w = T::one() / T::of_usize(gold.len());
        for &g in &gold {
            q[g] = w;
        }
    }
    let concepts = query_kb(kb, &inst.action).into_iter().map(|(_, d)| d.into_vec()).collect();
    Ok(Prepared { ids: encoder.ids(&prompt), gold, q, concepts })
}

impl<T: Scalar> UnderstandingModel<T> {
    fn distributions(&self, p: &Prepared<T>) -> Result<(Vec<T>, Vec<T>), UnderstandingError> {
        let h = self.encoder.forward_ids(&p.ids);
        let trace = self.head.forward(&h)?;
        let (p_f, _) = self.voter.forward(&trace.p, &p.concepts)?;
        Ok((trace.p, p_f))
    }

    /// Loss and accumulated gradients for one example scaled by `weight`.
    fn accumulate(&mut self, p: &Prepared<T>, weight: T) -> Result<T, UnderstandingError> {
        let h = self.encoder.forward_ids(&p.ids);
        let trace = self.head.forward(&h)?;
        let (p_f, vt) = self.voter.forward(&trace.p, &p.concepts)?;
        let floor = T::of(PROB_FLOOR);
        let mut loss = T::zero();
        let mut dp_f = vec![T::zero(); p_f.len()];
        for i in 0..p_f.len() {
            if p.q[i] > T::zero() {
                let pf = p_f[i].max(floor);
                loss += p.q[i] * (p.q[i].ln() - pf.ln());
                dp_f[i] = -weight * p.q[i] / pf;
            }
        }
        let dp_z = self.voter.backward(&vt, &dp_f);
        let dlogits = softmax_backward(&trace.p, &dp_z);
        let dh = self.head.backward(&trace, &dlogits);
        self.encoder.backward_ids(&p.ids, &dh);
        Ok(loss)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = vec![&mut self.encoder.emb];
        v.extend(self.head.params_mut());
        v.extend(self.voter.params_mut());
        v
    }

    pub(crate) fn params(&self) -> Vec<&Param<T>> {
        let mut v = vec![&self.encoder.emb];
        v.extend(self.head.params());
        v.extend(self.voter.params());
        v
    }

    pub(crate) fn params_for_load(&mut self) -> Vec<&mut Param<T>> {
        self.params_mut()
    }
}

/// Labels with `P_f >= tau`, always including the argmax.
pub fn decide<T: Scalar>(p_f: &[T], tau: T) -> BTreeSet<usize> {
    let mut out: BTreeSet<usize> = p_f.iter().enumerate().filter(|(_, &p)| p >= tau).map(|(i, _)| i).collect();
    out.insert(argmax(p_f));
    out
}

/// Grid value with the best micro-F1; the smallest wins ties.
pub fn tune_threshold<T: Scalar>(p_fs: &[Vec<T>], gold: &[BTreeSet<usize>], grid: &[f64]) -> (f64, Prf) {
    let mut best: Option<(f64, Prf)> = None;
    for &tau in grid {
        let pred: Vec<_> = p_fs.iter().map(|p| decide(p, T::of(tau))).collect();
        let prf = micro_prf(gold, &pred).expect("equal lengths");
        if best.as_ref().is_none_or(|(_, b)| prf.f1 > b.f1) {
            best = Some((tau, prf));
        }
    }
    best.expect("grid is nonempty")
}

fn evaluate<T: Scalar>(
    model: &UnderstandingModel<T>,
    data: &[Prepared<T>],
    grid: &[f64],
) -> Result<(f64, Prf), UnderstandingError> {
    let mut p_fs = Vec::with_capacity(data.len());
    for p in data {
        p_fs.push(model.distributions(p)?.1);
    }
    let gold: Vec<_> = data.iter().map(|p| p.gold.clone()).collect();
    Ok(tune_threshold(&p_fs, &gold, grid))
}

/// Trains on the train split and keeps the epoch with the best dev
/// micro-F1, together with its tuned threshold.
pub fn train_understanding<T: Scalar>(
    splits: &CorpusSplits,
    task: Task,
    hyper: &UnderstandingHyper,
    voting: VotingConfig,
    kb: &ConceptKb<T>,
) -> Result<(UnderstandingModel<T>, TrainReport), UnderstandingError> {
    hyper.validate()?;
    voting.validate()?;
    let space = check_task(task, kb)?;
    if splits.train.is_empty() || splits.dev.is_empty() {
        return Err(UnderstandingError::Contract("train and dev splits must be nonempty".into()));
    }
    let prompts: Vec<String> = splits
        .train
        .iter()
        .map(|i| render_understanding_prompt(i, task))
        .collect::<Result<_, _>>()?;
    let tokenizer = Tokenizer::build(prompts.iter().map(String::as_str), hyper.min_token_count);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let encoder = TinyEncoder::new(tokenizer, hyper.hidden, hyper.max_input_tokens, &mut rng);
    let head = ClassifierHead::new(hyper.hidden, space.len(), &mut rng);
    let voter = Voter::new(voting, space.len(), &mut rng);
    let mut model = UnderstandingModel {
        task,
        space,
        encoder,
        head,
        voter,
        threshold: T::of(0.5),
        kb_fingerprint: kb.config_fingerprint().to_string(),
        dev_metrics: BTreeMap::new(),
    };
    let train: Vec<_> = splits
        .train
        .iter()
        .map(|i| prepare(i, task, space, &model.encoder, kb))
        .collect::<Result<_, _>>()?;
    let dev: Vec<_> = splits
        .dev
        .iter()
        .map(|i| prepare(i, task, space, &model.encoder, kb))
        .collect::<Result<_, _>>()?;

    let steps_per_epoch = train.len().div_ceil(hyper.batch_size);
    let schedule = LinearSchedule::new(steps_per_epoch * hyper.epochs, hyper.warmup);
    let mut adam = Adam::new(AdamConfig { lr: hyper.lr, weight_decay: hyper.weight_decay, ..Default::default() });
    let clip = T::of(hyper.grad_norm);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::new();
    let mut best: Option<(f64, UnderstandingModel<T>, usize)> = None;
    let mut step = 0;
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let (mut max_norm, mut max_clipped) = (0.0f64, 0.0f64);
        for batch in order.chunks(hyper.batch_size) {
            model.params_mut().into_iter().for_each(Param::zero_grad);
            let w = T::one() / T::of_usize(batch.len());
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += model.accumulate(&train[i], w)?.as_f64();
            }
            if !batch_loss.is_finite() {
                return Err(UnderstandingError::Diverged { epoch, step, loss: batch_loss });
            }
            total += batch_loss;
            let mut params = model.params_mut();
            let norm = clip_grad_norm(&mut params, clip).as_f64();
            let clipped = crate::nn::grad_norm(&params).as_f64();
            max_norm = max_norm.max(norm);
            max_clipped = max_clipped.max(clipped);
            adam.step(&mut params, schedule.factor(step));
            step += 1;
        }
        let (tau, prf) = evaluate(&model, &dev, &hyper.threshold_grid)?;
        let rec = EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            dev_micro_f1: prf.f1,
            dev_threshold: tau,
            alpha: model.voter.alpha().as_f64(),
            max_grad_norm: max_norm,
            max_clipped_norm: max_clipped,
        };
        info!(
            "{} epoch {epoch}: train loss {:.4}, dev micro-F1 {:.4} at tau {tau:.2}, alpha {:.3}",
            task.id(),
            rec.train_loss,
            rec.dev_micro_f1,
            rec.alpha
        );
        curve.push(rec);
        if best.as_ref().is_none_or(|(f, _, _)| prf.f1 > *f) {
            let mut snapshot = model.clone();
            snapshot.threshold = T::of(tau);
            snapshot.dev_metrics = BTreeMap::from([
                ("micro_p".to_string(), prf.precision),
                ("micro_r".to_string(), prf.recall),
                ("micro_f1".to_string(), prf.f1),
            ]);
            best = Some((prf.f1, snapshot, epoch));
        }
    }
    let (_, mut selected, selected_epoch) = best.expect("at least one epoch");
    selected.voter.config.alpha = selected.voter.alpha().as_f64();
    debug!("selected epoch {selected_epoch}");
    Ok((selected, TrainReport { curve, selected_epoch, steps: step }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptVote<T: Scalar> {
    pub lemma: String,
    pub dist: LabelDistribution<T>,
}

/// Decision plus every intermediate distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T: Scalar> {
    pub instance_id: String,
    pub decision: BTreeSet<usize>,
    pub p_z: LabelDistribution<T>,
    pub concepts: Vec<ConceptVote<T>>,
    pub p_f: LabelDistribution<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRecord {
    pub lemma: String,
    pub dist: Vec<f64>,
}

/// One JSON line of prediction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub decision: Vec<String>,
    pub p_z: Vec<f64>,
    /// Empty unless the prediction was explained.
    pub concepts: Vec<ConceptRecord>,
    pub p_f: Vec<f64>,
}

impl<T: Scalar> Prediction<T> {
    /// Concept distributions are only included with `explain`.
    pub fn to_record(&self, space: LabelSpace, explain: bool) -> PredictionRecord {
        PredictionRecord {
            instance_id: self.instance_id.clone(),
            decision: self.decision.iter().map(|&i| space.id_at(i).to_string()).collect(),
            p_z: self.p_z.to_f64(),
            concepts: if explain {
                self.concepts
                    .iter()
                    .map(|c| ConceptRecord { lemma: c.lemma.clone(), dist: c.dist.to_f64() })
                    .collect()
            } else {
                Vec::new()
            },
            p_f: self.p_f.to_f64(),
        }
    }
}

pub fn predict<T: Scalar>(
    inst: &Instance,
    model: &UnderstandingModel<T>,
    kb: &ConceptKb<T>,
) -> Result<Prediction<T>, UnderstandingError> {
    check_task(model.task, kb)?;
    let prompt = render_understanding_prompt(inst, model.task)?;
    let h = model.encoder.forward_ids(&model.encoder.ids(&prompt));
    let trace = model.head.forward(&h)?;
    let concepts: Vec<ConceptVote<T>> = query_kb(kb, &inst.action)
        .into_iter()
        .map(|(c, dist)| ConceptVote { lemma: c.lemma, dist })
        .collect();
    let dists: Vec<Vec<T>> = concepts.iter().map(|c| c.dist.as_slice().to_vec()).collect();
    let (p_f, _) = model.voter.forward(&trace.p, &dists)?;
    Ok(Prediction {
        instance_id: inst.id(),
        decision: decide(&p_f, model.threshold),
        p_z: LabelDistribution::new(trace.p)?,
        concepts,
        p_f: LabelDistribution::new(p_f)?,
    })
}
