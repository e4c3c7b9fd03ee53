//! Dense ReLU networks with hand-written reverse-mode gradients, Adam,
//! plain gradient descent and target-network soft updates.
//!
//! Forward and backward passes are generic over [`Real`] so the same code
//! runs on `f64` and on forward-mode [`Dual`] numbers. Running the backward
//! pass on duals seeded with a direction `v` yields the exact
//! Hessian-vector product `H v` (forward-over-reverse).

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + AddAssign + Default
{
    fn from_f64(x: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn is_zero(self) -> bool;
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn is_zero(self) -> bool {
        self == 0.0
    }
}

/// `re + eps·ε` with ε² = 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }
}

impl Add for Dual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Neg for Dual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.re += o.re;
        self.eps += o.eps;
    }
}

impl Real for Dual {
    fn from_f64(x: f64) -> Self {
        Self::new(x, 0.0)
    }
    fn value(self) -> f64 {
        self.re
    }
    fn exp(self) -> Self {
        let e = libm::exp(self.re);
        Self::new(e, e * self.eps)
    }
    fn is_zero(self) -> bool {
        self.re == 0.0 && self.eps == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    /// Elementwise logistic squashing onto (0, 1).
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
    pub output: OutputActivation,
}

impl Architecture {
    pub fn new(input: usize, hidden: &[usize], output: usize, activation: OutputActivation) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self { widths, output: activation }
    }

    pub fn input(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of layer `k`'s weight block; its bias follows the weights.
    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers());
        let mut at = 0;
        for w in self.widths.windows(2) {
            out.push(at);
            at += w[0] * w[1] + w[1];
        }
        out
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    let one = T::from_f64(1.0);
    if x.value() >= 0.0 {
        let e = (-x).exp();
        recip(one + e)
    } else {
        let e = x.exp();
        e * recip(one + e)
    }
}

fn recip<T: Real>(x: T) -> T {
    // x = a + b·ε  ⇒ 1/x = 1/a − (b/a²)·ε ; for f64 the second term vanishes
    let a = x.value();
    let inv = T::from_f64(1.0 / a);
    // inv·(2 − x·inv) is exact for duals to first order and equals 1/a for reals
    inv * (T::from_f64(2.0) - x * inv)
}

/// Post-activation values of every layer for a batch (index 0 is the input).
#[derive(Debug, Clone, PartialEq)]
pub struct Tape<T = f64> {
    batch: usize,
    acts: Vec<Vec<T>>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("tape holds the input")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Batched forward pass recording activations.
pub fn forward_tape<T: Real>(arch: &Architecture, params: &[T], inputs: &[T], batch: usize) -> Result<Tape<T>> {
    if params.len() != arch.param_count() {
        return Err(Error::ShapeMismatch { expected: arch.param_count(), got: params.len() });
    }
    if inputs.len() != batch * arch.input() {
        return Err(Error::ShapeMismatch { expected: batch * arch.input(), got: inputs.len() });
    }
    let offsets = arch.offsets();
    let last = arch.layers() - 1;
    let mut acts: Vec<Vec<T>> = Vec::with_capacity(arch.layers() + 1);
    acts.push(inputs.to_vec());
    for (k, w) in arch.widths.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &params[offsets[k]..offsets[k] + n_in * n_out];
        let bias = &params[offsets[k] + n_in * n_out..offsets[k] + n_in * n_out + n_out];
        let x = &acts[k];
        let mut y = alloc::vec![T::default(); batch * n_out];
        for b in 0..batch {
            let xb = &x[b * n_in..(b + 1) * n_in];
            let yb = &mut y[b * n_out..(b + 1) * n_out];
            for (j, out) in yb.iter_mut().enumerate() {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let mut acc = bias[j];
                for (wi, xi) in row.iter().zip(xb) {
                    acc += *wi * *xi;
                }
                *out = if k < last {
                    if acc.value() > 0.0 { acc } else { T::default() }
                } else {
                    match arch.output {
                        OutputActivation::Identity => acc,
                        OutputActivation::Sigmoid => sigmoid(acc),
                    }
                };
            }
        }
        acts.push(y);
    }
    Ok(Tape { batch, acts })
}

/// Reverse pass: returns (parameter gradient, input gradient) for the
/// upstream gradient `upstream` on the batch outputs.
pub fn backward<T: Real>(arch: &Architecture, params: &[T], tape: &Tape<T>, upstream: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let batch = tape.batch;
    if tape.acts.len() != arch.layers() + 1 || tape.acts[0].len() != batch * arch.input() {
        return Err(Error::MissingCache);
    }
    if upstream.len() != batch * arch.output_width() {
        return Err(Error::ShapeMismatch { expected: batch * arch.output_width(), got: upstream.len() });
    }
    let offsets = arch.offsets();
    let last = arch.layers() - 1;
    let mut grad = alloc::vec![T::default(); params.len()];
    let mut delta: Vec<T> = upstream.to_vec();
    let one = T::from_f64(1.0);
    for k in (0..arch.layers()).rev() {
        let (n_in, n_out) = (arch.widths[k], arch.widths[k + 1]);
        let y = &tape.acts[k + 1];
        // through the activation
        for (d, &yv) in delta.iter_mut().zip(y) {
            if k < last {
                if yv.value() <= 0.0 {
                    *d = T::default();
                }
            } else if arch.output == OutputActivation::Sigmoid {
                *d = *d * yv * (one - yv);
            }
        }
        let x = &tape.acts[k];
        let w_off = offsets[k];
        let b_off = w_off + n_in * n_out;
        let weights = &params[w_off..b_off];
        let mut dx = alloc::vec![T::default(); batch * n_in];
        for b in 0..batch {
            let xb = &x[b * n_in..(b + 1) * n_in];
            let db = &delta[b * n_out..(b + 1) * n_out];
            let dxb = &mut dx[b * n_in..(b + 1) * n_in];
            for (j, &dj) in db.iter().enumerate() {
                if dj.is_zero() {
                    continue;
                }
                grad[b_off + j] += dj;
                let gw = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                for (g, &xi) in gw.iter_mut().zip(xb) {
                    *g += dj * xi;
                }
                let row = &weights[j * n_in..(j + 1) * n_in];
                for (dxi, &wi) in dxb.iter_mut().zip(row) {
                    *dxi += dj * wi;
                }
            }
        }
        delta = dx;
    }
    Ok((grad, delta))
}

/// A dense network with a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    arch: Architecture,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform fan-in initialization: He-style bound `sqrt(6/fan_in)` for
    /// ReLU layers, `sqrt(1/fan_in)` for the output layer. Biases start at 0.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut params = alloc::vec![0.0; arch.param_count()];
        let offsets = arch.offsets();
        let last = arch.layers() - 1;
        for (k, w) in arch.widths.windows(2).enumerate() {
            let bound = if k < last { libm::sqrt(6.0 / w[0] as f64) } else { libm::sqrt(1.0 / w[0] as f64) };
            for p in &mut params[offsets[k]..offsets[k] + w[0] * w[1]] {
                *p = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Self { arch, params }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::ShapeMismatch { expected: arch.param_count(), got: params.len() });
        }
        if arch.widths.len() < 2 || arch.widths.contains(&0) {
            return Err(Error::config("architecture", "need at least input and output widths, all positive"));
        }
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// (weights, bias) of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let off = self.arch.offsets()[k];
        let (n_in, n_out) = (self.arch.widths[k], self.arch.widths[k + 1]);
        (&self.params[off..off + n_in * n_out], &self.params[off + n_in * n_out..off + n_in * n_out + n_out])
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        forward_tape(&self.arch, &self.params, inputs, batch).map(|t| t.acts.into_iter().last().unwrap_or_default())
    }

    pub fn tape(&self, inputs: &[f64], batch: usize) -> Result<Tape> {
        forward_tape(&self.arch, &self.params, inputs, batch)
    }

    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        backward(&self.arch, &self.params, tape, upstream)
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, params: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: alloc::vec![0.0; params], v: alloc::vec![0.0; params], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch { expected: self.m.len(), got: grads.len().min(params.len()) });
        }
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / (libm::sqrt(*v / c2) + self.eps);
        }
        Ok(())
    }
}

/// `params − step·grads`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], step: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch { expected: params.len(), got: grads.len() });
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= step * g;
    }
    Ok(())
}

/// `target ← τ·online + (1−τ)·target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if target.arch != online.arch {
        return Err(Error::ArchitectureMismatch);
    }
    for (t, o) in target.params.iter_mut().zip(&online.params) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

pub fn to_duals(values: &[f64], direction: Option<&[f64]>) -> Vec<Dual> {
    match direction {
        Some(d) => values.iter().zip(d).map(|(&r, &e)| Dual::new(r, e)).collect(),
        None => values.iter().map(|&r| Dual::new(r, 0.0)).collect(),
    }
}

pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}
