use rand_chacha::ChaCha8Rng;

use super::UnderstandingError;
use crate::distribution::{softmax, LabelDistribution};
use crate::nn::{matvec, matvec_t_acc, outer_acc, Param};
use crate::scalar::Scalar;

/// `P_z = softmax(W2 tanh(W1 h + b1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead<T: Scalar> {
    pub hdim: usize,
    pub n_labels: usize,
    pub w1: Param<T>,
    pub b1: Param<T>,
    pub w2: Param<T>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct HeadTrace<T> {
    pub h: Vec<T>,
    pub a: Vec<T>,
    pub logits: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Scalar> ClassifierHead<T> {
    pub fn new(hdim: usize, n_labels: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            hdim,
            n_labels,
            w1: Param::glorot(hdim, hdim, rng),
            b1: Param::zeros(hdim),
            w2: Param::glorot(n_labels, hdim, rng),
        }
    }

    pub fn from_weights(hdim: usize, n_labels: usize, w1: Vec<T>, b1: Vec<T>, w2: Vec<T>) -> Self {
        assert_eq!(w1.len(), hdim * hdim);
        assert_eq!(b1.len(), hdim);
        assert_eq!(w2.len(), n_labels * hdim);
        Self { hdim, n_labels, w1: Param::from_vec(w1), b1: Param::from_vec(b1), w2: Param::from_vec(w2) }
    }

    pub fn forward(&self, h: &[T]) -> Result<HeadTrace<T>, UnderstandingError> {
        if h.len() != self.hdim {
            return Err(UnderstandingError::Dimension { expected: self.hdim, got: h.len() });
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(UnderstandingError::NonFinite("sentence representation"));
        }
        let mut a = vec![T::zero(); self.hdim];
        matvec(&self.w1.w, self.hdim, self.hdim, h, &mut a);
        for (x, &b) in a.iter_mut().zip(&self.b1.w) {
            *x = (*x + b).tanh();
        }
        let mut logits = vec![T::zero(); self.n_labels];
        matvec(&self.w2.w, self.n_labels, self.hdim, &a, &mut logits);
        let p = softmax(&logits);
        Ok(HeadTrace { h: h.to_vec(), a, logits, p })
    }

    /// Accumulates parameter gradients from `dL/dlogits`; returns `dL/dh`.
    pub fn backward(&mut self, trace: &HeadTrace<T>, dlogits: &[T]) -> Vec<T> {
        outer_acc(&mut self.w2.g, self.n_labels, self.hdim, dlogits, &trace.a);
        let mut da = vec![T::zero(); self.hdim];
        matvec_t_acc(&self.w2.w, self.n_labels, self.hdim, dlogits, &mut da);
        let dpre: Vec<T> = da.iter().zip(&trace.a).map(|(&g, &a)| g * (T::one() - a * a)).collect();
        outer_acc(&mut self.w1.g, self.hdim, self.hdim, &dpre, &trace.h);
        for (g, &d) in self.b1.g.iter_mut().zip(&dpre) {
            *g += d;
        }
        let mut dh = vec![T::zero(); self.hdim];
        matvec_t_acc(&self.w1.w, self.hdim, self.hdim, &dpre, &mut dh);
        dh
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2]
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w1, &self.b1, &self.w2]
    }
}

/// Label distribution of the head for one sentence representation.
pub fn classify<T: Scalar>(h: &[T], head: &ClassifierHead<T>) -> Result<LabelDistribution<T>, UnderstandingError> {
    let trace = head.forward(h)?;
    Ok(LabelDistribution::new(trace.p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::SIMPLEX_TOL;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn zero_input_gives_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = ClassifierHead::<f64>::new(4, 5, &mut rng);
        let p = classify(&[0.0; 4], &head).unwrap();
        assert!(p.as_slice().iter().all(|&x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn hand_logits() {
        // W1 = I, b1 = atanh(1/2) per unit, h = 0 -> a = [1/2, 1/2];
        // W2 = [[2, 0], [0, 0]] -> logits [1, 0]
        let b = 0.5f64.atanh();
        let head = ClassifierHead::from_weights(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![b, b], vec![2.0, 0.0, 0.0, 0.0]);
        let p = classify(&[0.0, 0.0], &head).unwrap();
        let e = std::f64::consts::E;
        assert!((p.as_slice()[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p.as_slice()[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = ClassifierHead::<f64>::new(3, 2, &mut rng);
        assert!(matches!(classify(&[f64::NAN, 0.0, 0.0], &head), Err(UnderstandingError::NonFinite(_))));
        assert!(matches!(classify(&[0.0; 2], &head), Err(UnderstandingError::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn output_on_simplex(seed in 0u64..1000, h in prop::collection::vec(-5.0f64..5.0, 6)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let head = ClassifierHead::<f64>::new(6, 8, &mut rng);
            let p = classify(&h, &head).unwrap();
            let s: f64 = p.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() < SIMPLEX_TOL);
            prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        }
    }
}
