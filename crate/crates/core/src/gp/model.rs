use alloc::vec::Vec;

use libm::log;

use super::kernel::{gram_matrix, Input, KernelKind};
use super::linalg::Cholesky;
use super::{GpError, Hyperparams};

/// Affine map between raw targets and the values the GP is trained on:
/// `stored = (raw − offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        offset: 0.0,
        scale: 1.0,
    };

    pub fn to_raw(&self, stored: f64) -> f64 {
        self.offset + self.scale * stored
    }

    pub fn to_stored(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Input>,
    targets: Vec<f64>,
    normalization: Normalization,
}

impl TrainingSet {
    /// Trains on the targets as given.
    pub fn new(inputs: Vec<Input>, targets: Vec<f64>) -> Result<Self, GpError> {
        Self::with_normalization(inputs, targets, Normalization::IDENTITY)
    }

    /// Standardizes the raw targets to zero mean and unit variance. A constant
    /// target vector keeps scale 1.
    pub fn standardized(inputs: Vec<Input>, raw_targets: Vec<f64>) -> Result<Self, GpError> {
        let offset = crate::math::mean(&raw_targets);
        let sd = crate::math::std_dev(&raw_targets);
        let scale = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        let norm = Normalization { offset, scale };
        let stored = raw_targets.iter().map(|&y| norm.to_stored(y)).collect();
        Self::with_normalization(inputs, stored, norm)
    }

    fn with_normalization(inputs: Vec<Input>, targets: Vec<f64>, normalization: Normalization) -> Result<Self, GpError> {
        if inputs.len() != targets.len() {
            return Err(GpError::LengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        if inputs.is_empty() {
            return Err(GpError::EmptyTrainingSet);
        }
        for (i, (p, y)) in inputs.iter().zip(&targets).enumerate() {
            if !(p.x.is_finite() && p.ell.is_finite() && y.is_finite()) {
                return Err(GpError::NonFinite(i));
            }
        }
        Ok(Self {
            inputs,
            targets,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Input] {
        &self.inputs
    }

    /// Targets in training units (after normalization).
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

const JITTER_BASE: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;
const MIN_PIVOT_REL: f64 = 1e-12;

/// Factors `K + σ_ε²I + jitter·I`.
///
/// With positive noise the jitter starts at `1e-8·tr(K)/t` and grows tenfold
/// up to `1e-4·tr(K)/t`. A noise-free model gets no jitter, so coincident
/// inputs are reported as ill-conditioned instead of being hidden.
fn factorize(train: &TrainingSet, hp: &Hyperparams, kind: KernelKind) -> Result<(Cholesky, f64), GpError> {
    hp.validate()?;
    let n = train.len();
    let mut a = gram_matrix(kind, &train.inputs, hp);
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let noise = hp.noise_std * hp.noise_std;
    for i in 0..n {
        a[i * n + i] += noise;
    }
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    let min_pivot = MIN_PIVOT_REL * max_diag;
    let unit = trace / n as f64;
    let ladder: &[f64] = if hp.noise_std > 0.0 {
        &[JITTER_BASE, 1e-7, 1e-6, 1e-5, JITTER_MAX]
    } else {
        &[0.0]
    };
    let mut work = a.clone();
    for &rel in ladder {
        let jitter = rel * unit;
        for i in 0..n {
            work[i * n + i] = a[i * n + i] + jitter;
        }
        if let Some(chol) = Cholesky::factor(&work, n, min_pivot) {
            return Ok((chol, jitter));
        }
    }
    Err(GpError::IllConditioned {
        jitter: ladder[ladder.len() - 1] * unit,
    })
}

/// An exact GP posterior, immutable once fitted.
#[derive(Debug, Clone)]
pub struct FittedGp {
    kind: KernelKind,
    hp: Hyperparams,
    train: TrainingSet,
    chol: Cholesky,
    weights: Vec<f64>,
    jitter: f64,
}

impl FittedGp {
    pub fn fit(train: &TrainingSet, hp: &Hyperparams, kind: KernelKind) -> Result<Self, GpError> {
        let (chol, jitter) = factorize(train, hp, kind)?;
        let centered: Vec<f64> = train.targets.iter().map(|y| y - hp.mean).collect();
        let weights = chol.solve(&centered);
        Ok(Self {
            kind,
            hp: *hp,
            train: train.clone(),
            chol,
            weights,
            jitter,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.train
    }

    /// Jitter that was added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &Cholesky {
        &self.chol
    }

    /// `(K + σ_ε²I)⁻¹ (y − μ)` in training units.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cross_covariance(&self, query: &Input) -> Vec<f64> {
        self.train
            .inputs
            .iter()
            .map(|p| self.kind.eval(query, p, &self.hp))
            .collect()
    }

    /// Predictive mean and variance in training units.
    pub fn predict_normalized(&self, query: &Input) -> (f64, f64) {
        let k = self.cross_covariance(query);
        let mean = self.hp.mean + k.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        let prior = self.kind.eval(query, query, &self.hp);
        let var = (prior - self.chol.quad_form(&k)).max(0.0);
        (mean, var)
    }

    /// Predictive mean and variance in raw target units.
    pub fn predict(&self, query: &Input) -> (f64, f64) {
        let (m, v) = self.predict_normalized(query);
        let norm = self.train.normalization;
        (norm.to_raw(m), v * norm.scale * norm.scale)
    }
}

/// `log p(y | φ)` of the training targets (in training units).
pub fn log_marginal_likelihood(train: &TrainingSet, hp: &Hyperparams, kind: KernelKind) -> Result<f64, GpError> {
    let (chol, _) = factorize(train, hp, kind)?;
    let centered: Vec<f64> = train.targets.iter().map(|y| y - hp.mean).collect();
    let n = train.len() as f64;
    Ok(-0.5 * chol.quad_form(&centered) - 0.5 * chol.log_det() - 0.5 * n * log(2.0 * core::f64::consts::PI))
}
