//! Small dense building blocks shared by the trainable models: parameters with
//! Adam state, row-major matrix kernels, gradient clipping and the warm-up
//! schedule.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A flat parameter tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Scalar> {
    pub w: Vec<T>,
    pub g: Vec<T>,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(n: usize) -> Self {
        Self::from_vec(vec![T::zero(); n])
    }

    pub fn from_vec(w: Vec<T>) -> Self {
        let n = w.len();
        Self { w, g: vec![T::zero(); n], m: vec![T::zero(); n], v: vec![T::zero(); n] }
    }

    /// Glorot-uniform initialisation for a `rows x cols` matrix.
    pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        Self::from_vec((0..rows * cols).map(|_| T::of(rng.gen_range(-s..s))).collect())
    }

    pub fn uniform(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        Self::from_vec((0..n).map(|_| T::of(rng.gen_range(-scale..scale))).collect())
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.g.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// `out = W x` for row-major `W` of shape `rows x cols`.
pub fn matvec<T: Scalar>(w: &[T], rows: usize, cols: usize, x: &[T], out: &mut [T]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o = row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    }
}

/// `out += W^T y`.
pub fn matvec_t_acc<T: Scalar>(w: &[T], rows: usize, cols: usize, y: &[T], out: &mut [T]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == T::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, &a) in out.iter_mut().zip(row) {
            *o += a * yr;
        }
    }
}

/// `g += y x^T`.
pub fn outer_acc<T: Scalar>(g: &mut [T], rows: usize, cols: usize, y: &[T], x: &[T]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == T::zero() {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (o, &b) in row.iter_mut().zip(x) {
            *o += yr * b;
        }
    }
}

pub fn add_assign<T: Scalar>(a: &mut [T], b: &[T]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Backward pass of softmax: given `p = softmax(z)` and `dL/dp`, returns
/// `dL/dz`.
pub fn softmax_backward<T: Scalar>(p: &[T], dp: &[T]) -> Vec<T> {
    let dot = p.iter().zip(dp).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    p.iter().zip(dp).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}

/// Global L2 norm of all gradients.
pub fn grad_norm<T: Scalar>(params: &[&mut Param<T>]) -> T {
    params
        .iter()
        .flat_map(|p| p.g.iter())
        .fold(T::zero(), |acc, &g| acc + g * g)
        .sqrt()
}

/// Rescales gradients so their global norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(params: &mut [&mut Param<T>], max_norm: T) -> T {
    let norm = grad_norm(params);
    if norm > max_norm && norm > T::zero() {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            p.g.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update at learning rate `config.lr * lr_scale`.
    pub fn step<T: Scalar>(&mut self, params: &mut [&mut Param<T>], lr_scale: f64) {
        self.t += 1;
        let c = self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let step = T::of(c.lr * lr_scale * bc2.sqrt() / bc1);
        let eps = T::of(c.eps);
        let wd = T::of(c.lr * lr_scale * c.weight_decay);
        for p in params.iter_mut() {
            let Param { w, g, m, v } = &mut **p;
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let decay = wd * w[i];
                w[i] -= step * m[i] / (v[i].sqrt() + eps) + decay;
            }
        }
    }
}

/// Linear warm-up over the first `warmup` fraction of steps, then linear
/// decay to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule {
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl LinearSchedule {
    pub fn new(total_steps: usize, warmup: f64) -> Self {
        let warmup_steps = ((total_steps as f64) * warmup).round() as usize;
        Self { total_steps: total_steps.max(1), warmup_steps }
    }

    /// Multiplier for 0-based `step`.
    pub fn factor(&self, step: usize) -> f64 {
        let s = step as f64 + 1.0;
        if step < self.warmup_steps {
            s / self.warmup_steps as f64
        } else {
            let rest = (self.total_steps - self.warmup_steps).max(1) as f64;
            ((self.total_steps as f64 - step as f64) / rest).clamp(0.0, 1.0)
        }
    }
}

/// Little-endian f64 dump of parameters, in order.
pub fn params_to_bytes<T: Scalar>(params: &[&Param<T>]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in params {
        for &w in &p.w {
            out.extend_from_slice(&w.as_f64().to_le_bytes());
        }
    }
    out
}

/// Inverse of [`params_to_bytes`]; the parameter shapes must already match.
pub fn params_from_bytes<T: Scalar>(params: &mut [&mut Param<T>], bytes: &[u8]) -> Result<(), String> {
    let expected: usize = params.iter().map(|p| p.len() * 8).sum();
    if bytes.len() != expected {
        return Err(format!("weights blob has {} bytes, expected {expected}", bytes.len()));
    }
    let mut chunks = bytes.chunks_exact(8);
    for p in params.iter_mut() {
        for w in p.w.iter_mut() {
            let b: [u8; 8] = chunks.next().expect("length checked").try_into().expect("8 bytes");
            *w = T::of(f64::from_le_bytes(b));
        }
    }
    Ok(())
}
