//! Gaussian-process regression with Matérn 5/2 and exponentially-decreasing
//! kernels, exact inference, and MCMC over hyperparameters.

mod kernel;
mod linalg;
mod mcmc;
mod model;

pub use kernel::{exp_decay_kernel, gram_matrix, matern52, sum_kernel, Input, KernelKind};
pub use linalg::Cholesky;
pub use mcmc::{log_posterior, sample_hyperparams, SamplerConfig};
pub use model::{log_marginal_likelihood, FittedGp, Normalization, TrainingSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training inputs and targets differ in length ({inputs} vs {targets})")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("non-finite training data at row {0}")]
    NonFinite(usize),
    #[error("invalid hyperparameter `{0}`")]
    InvalidHyperparameter(&'static str),
    #[error("covariance matrix is ill-conditioned (factorization failed with jitter up to {jitter:e})")]
    IllConditioned { jitter: f64 },
    #[error("at least one hyperparameter sample is required")]
    NoSamples,
}

/// GP hyperparameters `φ`.
///
/// `signal_var` and `lengthscale` belong to the Matérn kernel; `exp_alpha`
/// and `exp_beta` to the exponentially-decreasing kernel and are ignored by
/// the plain Matérn model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub mean: f64,
    pub noise_std: f64,
    pub signal_var: f64,
    /// The Matérn distance divisor `ρ²`.
    pub lengthscale: f64,
    pub exp_alpha: f64,
    pub exp_beta: f64,
}

impl Hyperparams {
    /// Medians of the hyperparameter priors.
    pub const PRIOR_MEDIAN: Hyperparams = Hyperparams {
        mean: 0.0,
        noise_std: 1.0,
        signal_var: 1.0,
        lengthscale: 1.0,
        exp_alpha: 1.0,
        exp_beta: 1.0,
    };

    /// Checks positivity and finiteness. `noise_std` may be zero (noise-free model).
    pub fn validate(&self) -> Result<(), GpError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !self.mean.is_finite() {
            return Err(GpError::InvalidHyperparameter("mean"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(GpError::InvalidHyperparameter("noise_std"));
        }
        if !pos(self.signal_var) {
            return Err(GpError::InvalidHyperparameter("signal_var"));
        }
        if !pos(self.lengthscale) {
            return Err(GpError::InvalidHyperparameter("lengthscale"));
        }
        if !pos(self.exp_alpha) {
            return Err(GpError::InvalidHyperparameter("exp_alpha"));
        }
        if !pos(self.exp_beta) {
            return Err(GpError::InvalidHyperparameter("exp_beta"));
        }
        Ok(())
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::PRIOR_MEDIAN
    }
}
