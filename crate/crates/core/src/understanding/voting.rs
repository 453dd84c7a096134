use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::UnderstandingError;
use crate::distribution::{softmax, LabelDistribution};
use crate::nn::{matvec, matvec_t_acc, outer_acc, sigmoid, softmax_backward, Param};
use crate::scalar::Scalar;

/// How concept distributions are combined with the classifier output.
///
/// `Aver`, `Max` and `Sum` pool the concept distributions and mix the result
/// with a fixed `alpha`. `Gate` averages and mixes with a learned `alpha`.
/// `Mlp` feeds `[P_z; K]` to a one-hidden-layer network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VotingMode {
    Aver,
    Max,
    Sum,
    Mlp,
    Gate,
}

impl std::str::FromStr for VotingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aver" | "avg" | "mean" => Ok(Self::Aver),
            "max" => Ok(Self::Max),
            "sum" => Ok(Self::Sum),
            "mlp" => Ok(Self::Mlp),
            "gate" => Ok(Self::Gate),
            other => Err(format!("unknown voting mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Aver,
    Max,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VotingConfig {
    pub mode: VotingMode,
    /// Weight of the classifier output; the starting value when learned.
    pub alpha: f64,
    pub mlp_hidden: usize,
}

impl Default for VotingConfig {
    fn default() -> Self {
        Self { mode: VotingMode::Gate, alpha: 0.5, mlp_hidden: 16 }
    }
}

impl VotingConfig {
    pub fn validate(&self) -> Result<(), UnderstandingError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(UnderstandingError::Contract(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.mode == VotingMode::Mlp && self.mlp_hidden == 0 {
            return Err(UnderstandingError::Contract("mlp_hidden must be positive".into()));
        }
        Ok(())
    }

    pub fn pool(&self) -> Pool {
        match self.mode {
            VotingMode::Max => Pool::Max,
            VotingMode::Sum => Pool::Sum,
            _ => Pool::Aver,
        }
    }

    /// Only an interior gate is trained; endpoints stay exact.
    pub fn learns_alpha(&self) -> bool {
        self.mode == VotingMode::Gate && self.alpha > 0.0 && self.alpha < 1.0
    }
}

/// Voting configuration plus its trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Voter<T: Scalar> {
    pub config: VotingConfig,
    /// Logit of the learned gate.
    pub gate: Param<T>,
    pub mlp_in: Param<T>,
    pub mlp_b: Param<T>,
    pub mlp_out: Param<T>,
    n_labels: usize,
}

pub(crate) struct VoteTrace<T> {
    p_z: Vec<T>,
    k: Vec<T>,
    alpha: T,
    mlp: Option<(Vec<T>, Vec<T>, Vec<T>)>,
    bypass: bool,
}

impl<T: Scalar> Voter<T> {
    pub fn new(config: VotingConfig, n_labels: usize, rng: &mut ChaCha8Rng) -> Self {
        let hidden = if config.mode == VotingMode::Mlp { config.mlp_hidden } else { 0 };
        let a = config.alpha.clamp(1e-12, 1.0 - 1e-12);
        Self {
            config,
            gate: Param::from_vec(vec![T::of((a / (1.0 - a)).ln())]),
            mlp_in: Param::glorot(hidden, 2 * n_labels, rng),
            mlp_b: Param::zeros(hidden),
            mlp_out: Param::glorot(n_labels, hidden, rng),
            n_labels,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn alpha(&self) -> T {
        if self.config.learns_alpha() {
            sigmoid(self.gate.w[0])
        } else {
            T::of(self.config.alpha)
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gate, &mut self.mlp_in, &mut self.mlp_b, &mut self.mlp_out]
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gate, &self.mlp_in, &self.mlp_b, &self.mlp_out]
    }

    pub(crate) fn forward(&self, p_z: &[T], dists: &[Vec<T>]) -> Result<(Vec<T>, VoteTrace<T>), UnderstandingError> {
        for d in dists {
            if d.len() != p_z.len() {
                return Err(UnderstandingError::Dimension { expected: p_z.len(), got: d.len() });
            }
        }
        let bypass = dists.is_empty();
        if bypass {
            let trace = VoteTrace { p_z: p_z.to_vec(), k: vec![], alpha: T::one(), mlp: None, bypass };
            return Ok((p_z.to_vec(), trace));
        }
        let k = pool(dists, self.config.pool());
        if self.config.mode == VotingMode::Mlp {
            let h = self.config.mlp_hidden;
            let n = self.n_labels;
            let x: Vec<T> = p_z.iter().chain(&k).copied().collect();
            let mut a = vec![T::zero(); h];
            matvec(&self.mlp_in.w, h, 2 * n, &x, &mut a);
            for (v, &b) in a.iter_mut().zip(&self.mlp_b.w) {
                *v = (*v + b).tanh();
            }
            let mut logits = vec![T::zero(); n];
            matvec(&self.mlp_out.w, n, h, &a, &mut logits);
            let p = softmax(&logits);
            let trace = VoteTrace { p_z: p_z.to_vec(), k, alpha: T::zero(), mlp: Some((x, a, p.clone())), bypass };
            return Ok((p, trace));
        }
        let alpha = self.alpha();
        let beta = T::one() - alpha;
        let p_f = p_z.iter().zip(&k).map(|(&p, &q)| alpha * p + beta * q).collect();
        Ok((p_f, VoteTrace { p_z: p_z.to_vec(), k, alpha, mlp: None, bypass }))
    }

    /// Accumulates voter gradients; returns `dL/dP_z`.
    pub(crate) fn backward(&mut self, trace: &VoteTrace<T>, dp_f: &[T]) -> Vec<T> {
        if trace.bypass {
            return dp_f.to_vec();
        }
        if let Some((x, a, p)) = &trace.mlp {
            let h = self.config.mlp_hidden;
            let n = self.n_labels;
            let dlogits = softmax_backward(p, dp_f);
            outer_acc(&mut self.mlp_out.g, n, h, &dlogits, a);
            let mut da = vec![T::zero(); h];
            matvec_t_acc(&self.mlp_out.w, n, h, &dlogits, &mut da);
            let dpre: Vec<T> = da.iter().zip(a).map(|(&g, &v)| g * (T::one() - v * v)).collect();
            outer_acc(&mut self.mlp_in.g, h, 2 * n, &dpre, x);
            for (g, &d) in self.mlp_b.g.iter_mut().zip(&dpre) {
                *g += d;
            }
            let mut dx = vec![T::zero(); 2 * n];
            matvec_t_acc(&self.mlp_in.w, h, 2 * n, &dpre, &mut dx);
            dx.truncate(n);
            return dx;
        }
        if self.config.learns_alpha() {
            let dalpha = dp_f
                .iter()
                .zip(trace.p_z.iter().zip(&trace.k))
                .fold(T::zero(), |acc, (&g, (&p, &k))| acc + g * (p - k));
            self.gate.g[0] += dalpha * trace.alpha * (T::one() - trace.alpha);
        }
        dp_f.iter().map(|&g| g * trace.alpha).collect()
    }
}

/// Pools concept distributions; `Max` and `Sum` are renormalized.
pub fn pool<T: Scalar>(dists: &[Vec<T>], mode: Pool) -> Vec<T> {
    let n = dists[0].len();
    let mut k = vec![T::zero(); n];
    match mode {
        Pool::Aver | Pool::Sum => {
            for d in dists {
                for (a, &b) in k.iter_mut().zip(d) {
                    *a += b;
                }
            }
        }
        Pool::Max => {
            for d in dists {
                for (a, &b) in k.iter_mut().zip(d) {
                    *a = a.max(b);
                }
            }
        }
    }
    let norm = match mode {
        Pool::Aver => T::of_usize(dists.len()),
        _ => k.iter().copied().sum(),
    };
    k.iter_mut().for_each(|v| *v /= norm);
    k
}

/// Combines the classifier distribution with concept distributions. An empty
/// concept list returns `p_z` unchanged.
pub fn vote<T: Scalar>(
    p_z: &LabelDistribution<T>,
    concept_dists: &[LabelDistribution<T>],
    voter: &Voter<T>,
) -> Result<LabelDistribution<T>, UnderstandingError> {
    let dists: Vec<Vec<T>> = concept_dists.iter().map(|d| d.as_slice().to_vec()).collect();
    let (p_f, _) = voter.forward(p_z.as_slice(), &dists)?;
    Ok(LabelDistribution::new(p_f)?)
}
