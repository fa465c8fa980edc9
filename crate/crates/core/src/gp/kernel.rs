use alloc::vec::Vec;

use libm::{exp, log, sqrt};

use super::Hyperparams;

const SQRT_5: f64 = 2.236_067_977_499_79;

/// A training or query location: the unit-interval parameter `x` and, for
/// the locality-aware model, the execution index `ell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Input {
    pub x: f64,
    pub ell: f64,
}

impl Input {
    pub fn plain(x: f64) -> Self {
        Self { x, ell: 1.0 }
    }

    pub fn at(x: f64, ell: f64) -> Self {
        Self { x, ell }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Matérn 5/2 over `x`.
    Matern,
    /// Matérn 5/2 over `x` plus exponentially-decreasing kernel over `ell`.
    MaternPlusExp,
}

impl KernelKind {
    pub fn eval(&self, a: &Input, b: &Input, hp: &Hyperparams) -> f64 {
        match self {
            KernelKind::Matern => matern52(&[a.x], &[b.x], hp.signal_var, hp.lengthscale),
            KernelKind::MaternPlusExp => sum_kernel(a, b, hp),
        }
    }
}

/// Matérn 5/2 with `r = ‖a − b‖₂ / ρ²`.
pub fn matern52(a: &[f64], b: &[f64], signal_var: f64, lengthscale: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    let r = sqrt(d2) / lengthscale;
    signal_var * (1.0 + SQRT_5 * r + 5.0 / 3.0 * r * r) * exp(-SQRT_5 * r)
}

/// `β^α / (l1 + l2 + β)^α`.
pub fn exp_decay_kernel(l1: f64, l2: f64, alpha: f64, beta: f64) -> f64 {
    exp(alpha * (log(beta) - log(l1 + l2 + beta)))
}

pub fn sum_kernel(a: &Input, b: &Input, hp: &Hyperparams) -> f64 {
    matern52(&[a.x], &[b.x], hp.signal_var, hp.lengthscale)
        + exp_decay_kernel(a.ell, b.ell, hp.exp_alpha, hp.exp_beta)
}

/// Row-major Gram matrix over `inputs`.
pub fn gram_matrix(kind: KernelKind, inputs: &[Input], hp: &Hyperparams) -> Vec<f64> {
    let n = inputs.len();
    let mut k = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kind.eval(&inputs[i], &inputs[j], hp);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}
