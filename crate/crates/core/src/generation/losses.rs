use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::scalar::Scalar;

/// Floor applied to predicted probabilities inside the log.
pub const KL_FLOOR: f64 = 1e-12;

/// Weights of the LM and emotion terms, and target label smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenLossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub epsilon: f64,
}

impl Default for GenLossConfig {
    fn default() -> Self {
        Self { lambda1: 1.0, lambda2: 1.5, epsilon: 0.1 }
    }
}

impl GenLossConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || !(self.lambda1 + self.lambda2 > 0.0) {
            return Err(GenerationError::Contract(format!(
                "need lambda1, lambda2 >= 0 with a positive sum, got {} and {}",
                self.lambda1, self.lambda2
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(GenerationError::Contract(format!("epsilon {} outside [0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

/// Mean negative log-likelihood over masked positions.
pub fn lm_loss<T: Scalar>(logprobs: &[T], mask: &[bool]) -> Result<T, GenerationError> {
    if logprobs.len() != mask.len() {
        return Err(GenerationError::Contract(format!(
            "{} log-probabilities for a mask of length {}",
            logprobs.len(),
            mask.len()
        )));
    }
    let (sum, n) = logprobs
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((T::zero(), 0usize), |(s, n), (&lp, _)| (s - lp, n + 1));
    if n == 0 {
        return Err(GenerationError::EmptyMask);
    }
    Ok(sum / T::of_usize(n))
}

/// `(1 - eps) q + eps / n`.
pub fn smooth<T: Scalar>(q: &[T], eps: f64) -> Vec<T> {
    let e = T::of(eps);
    let u = e / T::of_usize(q.len());
    q.iter().map(|&x| (T::one() - e) * x + u).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlLoss<T> {
    pub value: T,
    /// Whether any predicted probability hit [`KL_FLOOR`].
    pub floored: bool,
}

/// `KL(q || p)` with `p` floored at [`KL_FLOOR`].
pub fn kl_divergence<T: Scalar>(q: &[T], p: &[T]) -> KlLoss<T> {
    let floor = T::of(KL_FLOOR);
    let mut floored = false;
    let mut value = T::zero();
    for (&qi, &pi) in q.iter().zip(p) {
        if qi > T::zero() {
            if pi < floor {
                floored = true;
            }
            value += qi * (qi.ln() - pi.max(floor).ln());
        }
    }
    KlLoss { value, floored }
}

/// Divergence of the predicted emotion distribution `p` from the target `q`
/// smoothed with `eps`.
pub fn kl_loss<T: Scalar>(p: &[T], q: &[T], eps: f64) -> Result<KlLoss<T>, GenerationError> {
    if p.len() != q.len() || p.is_empty() {
        return Err(GenerationError::Contract(format!("distribution sizes {} and {}", p.len(), q.len())));
    }
    for v in [p, q] {
        let s: f64 = v.iter().map(|x| x.as_f64()).sum();
        if (s - 1.0).abs() > 1e-6 || v.iter().any(|x| !(x.as_f64() >= 0.0)) {
            return Err(GenerationError::Contract("inputs must lie on the simplex".into()));
        }
    }
    Ok(kl_divergence(&smooth(q, eps), p))
}

pub fn total_loss<T: Scalar>(lm: T, kl: T, cfg: &GenLossConfig) -> T {
    T::of(cfg.lambda1) * lm + T::of(cfg.lambda2) * kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lm_fixtures() {
        let mask = [false, true, true, false];
        assert_eq!(lm_loss(&[-3.0, 0.0, 0.0, -7.0], &mask).unwrap(), 0.0);
        let u = -(10f64.ln());
        assert!((lm_loss(&[u; 4], &mask).unwrap() - 10f64.ln()).abs() < 1e-12);
        assert!(matches!(lm_loss(&[0.0f64; 2], &[false, false]), Err(GenerationError::EmptyMask)));
    }

    #[test]
    fn kl_fixtures() {
        let q = {
            let mut v = vec![0.0f64; 8];
            v[0] = 1.0;
            v
        };
        let u = vec![0.125f64; 8];
        let k = kl_loss(&u, &q, 0.1).unwrap();
        // q_s = 0.9125 at the label, 0.0125 elsewhere
        let expect = 0.9125 * (0.9125f64 * 8.0).ln() + 7.0 * 0.0125 * (0.0125f64 * 8.0).ln();
        assert!((k.value - expect).abs() < 1e-12);
        assert!(!k.floored);
        let qs = smooth(&q, 0.1);
        assert!(kl_loss(&qs, &q, 0.1).unwrap().value.abs() < 1e-12);
        assert_eq!(kl_loss(&q, &q, 0.0).unwrap().value, 0.0);
        assert!(kl_loss(&q, &u, 0.0).unwrap().floored);
    }

    #[test]
    fn total_fixtures() {
        let cfg = GenLossConfig::default();
        assert_eq!(total_loss(2.0f64, 0.4, &cfg), 2.6);
        let no_e = GenLossConfig { lambda2: 0.0, ..cfg };
        assert_eq!(total_loss(2.0f64, 0.4, &no_e), 2.0);
        let no_lm = GenLossConfig { lambda1: 0.0, ..cfg };
        assert_eq!(total_loss(3.0f64, 0.0, &no_lm), 0.0);
        assert!(GenLossConfig { lambda1: 0.0, lambda2: 0.0, epsilon: 0.1 }.validate().is_err());
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, n).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn kl_nonnegative(p in simplex(8), q in simplex(8), eps in 0.0f64..0.5) {
            prop_assert!(kl_loss(&p, &q, eps).unwrap().value >= -1e-12);
            prop_assert!(kl_loss(&smooth(&q, eps), &q, eps).unwrap().value.abs() < 1e-9);
        }

        #[test]
        fn lm_mask_locality(lp in prop::collection::vec(-5.0f64..0.0, 6), other in prop::collection::vec(-5.0f64..0.0, 6)) {
            let mask = [false, false, true, true, false, true];
            let mut mixed = lp.clone();
            for i in 0..6 {
                if !mask[i] {
                    mixed[i] = other[i];
                }
            }
            prop_assert_eq!(lm_loss(&lp, &mask).unwrap(), lm_loss(&mixed, &mask).unwrap());
        }

        #[test]
        fn total_linear(lm in 0.0f64..10.0, kl in 0.0f64..10.0, l1 in 0.0f64..3.0, l2 in 0.0f64..3.0) {
            let cfg = GenLossConfig { lambda1: l1, lambda2: l2, epsilon: 0.1 };
            prop_assert!((total_loss(lm, kl, &cfg) - (l1 * lm + l2 * kl)).abs() < 1e-12);
        }
    }
}
