//! Probability vectors over a fixed label space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Tolerance used when checking that a vector lies on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution is empty")]
    Empty,
    #[error("entry {index} is negative or non-finite ({value})")]
    BadEntry { index: usize, value: f64 },
    #[error("entries sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("weights sum to zero, cannot normalize")]
    ZeroMass,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct LabelDistribution<T: Scalar> {
    probs: Vec<T>,
}

impl<T: Scalar> LabelDistribution<T> {
    /// Validates an already-normalized vector.
    pub fn new(probs: Vec<T>) -> Result<Self, DistributionError> {
        check_entries(&probs)?;
        let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
        // f32 accumulates more rounding
        let tol = if std::mem::size_of::<T>() == 4 { 1e-5 } else { SIMPLEX_TOL };
        if (total - 1.0).abs() > tol {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Self { probs })
    }

    /// Scales nonnegative weights onto the simplex.
    pub fn from_weights(weights: Vec<T>) -> Result<Self, DistributionError> {
        check_entries(&weights)?;
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(DistributionError::ZeroMass);
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Exponential normalization of raw scores.
    pub fn softmax(logits: &[T]) -> Result<Self, DistributionError> {
        if logits.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some((index, v)) = logits.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DistributionError::BadEntry {
                index,
                value: v.as_f64(),
            });
        }
        Ok(Self {
            probs: softmax(logits),
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one label");
        Self {
            probs: vec![T::one() / T::of_usize(n); n],
        }
    }

    pub fn one_hot(n: usize, k: usize) -> Self {
        assert!(k < n, "one-hot index out of range");
        let mut probs = vec![T::zero(); n];
        probs[k] = T::one();
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    /// First index of the largest probability.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.as_f64()).collect()
    }
}

fn check_entries<T: Scalar>(v: &[T]) -> Result<(), DistributionError> {
    if v.is_empty() {
        return Err(DistributionError::Empty);
    }
    for (index, x) in v.iter().enumerate() {
        if !x.is_finite() || *x < T::zero() {
            return Err(DistributionError::BadEntry {
                index,
                value: x.as_f64(),
            });
        }
    }
    Ok(())
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Log-softmax, stable for large logits.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&l| l - lse).collect()
}

/// First index of the maximum; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
