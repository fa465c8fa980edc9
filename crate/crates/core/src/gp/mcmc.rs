//! Random-walk Metropolis over log-transformed hyperparameters.
//!
//! Priors: `ln σ_ε, ln σ, ln ρ², ln α, ln β ~ N(0, 1)` and `μ ~ N(0, 1)`, all
//! on standardized targets. The step size adapts during burn-in toward an
//! acceptance rate of one quarter and is frozen afterwards.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::kernel::KernelKind;
use super::model::{log_marginal_likelihood, TrainingSet};
use super::{GpError, Hyperparams};
use crate::math::log_std_normal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub initial_step: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in: 500,
            thin: 10,
            initial_step: 0.3,
        }
    }
}

fn dims(kind: KernelKind) -> usize {
    match kind {
        KernelKind::Matern => 4,
        KernelKind::MaternPlusExp => 6,
    }
}

fn unpack(u: &[f64]) -> Hyperparams {
    let mut hp = Hyperparams {
        mean: u[0],
        noise_std: exp(u[1]),
        signal_var: exp(2.0 * u[2]),
        lengthscale: exp(u[3]),
        ..Hyperparams::PRIOR_MEDIAN
    };
    if u.len() == 6 {
        hp.exp_alpha = exp(u[4]);
        hp.exp_beta = exp(u[5]);
    }
    hp
}

fn pack(hp: &Hyperparams, kind: KernelKind) -> Vec<f64> {
    let mut u = alloc::vec![hp.mean, log(hp.noise_std), 0.5 * log(hp.signal_var), log(hp.lengthscale)];
    if kind == KernelKind::MaternPlusExp {
        u.push(log(hp.exp_alpha));
        u.push(log(hp.exp_beta));
    }
    u
}

/// Unnormalized log posterior density of `hp`, in log-parameter coordinates.
/// Returns `-inf` where the likelihood cannot be evaluated.
pub fn log_posterior(train: &TrainingSet, kind: KernelKind, hp: &Hyperparams) -> f64 {
    if !(hp.noise_std > 0.0) {
        return f64::NEG_INFINITY;
    }
    let prior: f64 = pack(hp, kind).iter().map(|&v| log_std_normal(v)).sum();
    match log_marginal_likelihood(train, hp, kind) {
        Ok(lml) if lml.is_finite() => lml + prior,
        _ => f64::NEG_INFINITY,
    }
}

/// Draws `n_samples` hyperparameter vectors from `p(φ | D)`.
pub fn sample_hyperparams(
    train: &TrainingSet,
    kind: KernelKind,
    n_samples: usize,
    seed: u64,
    config: &SamplerConfig,
) -> Result<Vec<Hyperparams>, GpError> {
    if n_samples == 0 {
        return Err(GpError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dims(kind);
    let mut current = pack(&Hyperparams::PRIOR_MEDIAN, kind);
    let mut current_lp = log_posterior(train, kind, &unpack(&current));
    if !current_lp.is_finite() {
        return Err(GpError::IllConditioned { jitter: 0.0 });
    }
    let mut step = config.initial_step / sqrt(d as f64 / 4.0);
    let mut accepted = 0usize;
    let mut window = 0usize;
    let thin = config.thin.max(1);
    let total = config.burn_in + n_samples * thin;
    let mut samples = Vec::with_capacity(n_samples);
    let mut proposal = alloc::vec![0.0; d];
    for iter in 0..total {
        for (p, c) in proposal.iter_mut().zip(&current) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = c + step * z;
        }
        let lp = log_posterior(train, kind, &unpack(&proposal));
        let u: f64 = rng.random();
        if lp.is_finite() && log(u) < lp - current_lp {
            current.copy_from_slice(&proposal);
            current_lp = lp;
            accepted += 1;
        }
        window += 1;
        if iter < config.burn_in && window == 25 {
            let rate = accepted as f64 / window as f64;
            step = (step * exp(2.0 * (rate - 0.25))).clamp(1e-3, 5.0);
            accepted = 0;
            window = 0;
        }
        if iter >= config.burn_in && (iter - config.burn_in + 1).is_multiple_of(thin) {
            samples.push(unpack(&current));
        }
    }
    Ok(samples)
}
