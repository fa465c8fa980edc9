//! Surrogate models of the total loop time `T_total(x)`.
//!
//! The plain model regresses run totals on `x` with a Matérn kernel. The
//! locality-aware model regresses individual execution times on `(x, ℓ)` with
//! the Matérn plus exponentially-decreasing kernel, then sums the per-execution
//! predictions over `ℓ = 1..=L`.

use alloc::vec::Vec;

use libm::round;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mes::sample_max_values;
use super::{stream_seed, BoConfig, BoError, Observation, SurrogateMode};
use crate::gp::{exp_decay_kernel, sample_hyperparams, FittedGp, Hyperparams, Input, KernelKind, TrainingSet};

/// Why a locality-aware request was served by the plain model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateFallback {
    /// Every observation has a single execution, so there is no `ℓ` axis.
    SingleExecution,
}

/// Subsampling stride along `ℓ`, chosen so that about four executions per
/// run are used for training.
pub fn subsample_stride(executions: usize) -> usize {
    (round(executions as f64 / 4.0) as usize).max(1)
}

/// Training rows derived from a dataset, before hyperparameters are chosen.
#[derive(Debug, Clone)]
pub struct SurrogateData {
    pub training: TrainingSet,
    pub kind: KernelKind,
    pub mode: SurrogateMode,
    /// Number of executions `L` the prediction sums over.
    pub executions: usize,
    pub fallback: Option<SurrogateFallback>,
    /// Lowest observed total.
    pub best_total: f64,
}

impl SurrogateData {
    pub fn from_observations(dataset: &[Observation], config: &BoConfig) -> Result<Self, BoError> {
        if dataset.is_empty() {
            return Err(BoError::EmptyDataset);
        }
        let executions = dataset.iter().map(|o| o.per_execution.len()).max().unwrap_or(1);
        let best_total = dataset.iter().map(|o| o.total).fold(f64::INFINITY, f64::min);
        let mut fallback = None;
        let mode = match config.surrogate {
            SurrogateMode::LocalityAware if executions <= 1 => {
                fallback = Some(SurrogateFallback::SingleExecution);
                SurrogateMode::Plain
            }
            m => m,
        };
        let (inputs, targets, kind) = match mode {
            SurrogateMode::Plain => (
                dataset.iter().map(|o| Input::plain(o.x)).collect::<Vec<_>>(),
                dataset.iter().map(|o| o.total).collect::<Vec<_>>(),
                KernelKind::Matern,
            ),
            SurrogateMode::LocalityAware => {
                let stride = config.subsample_k.unwrap_or_else(|| subsample_stride(executions)).max(1);
                let mut inputs = Vec::new();
                let mut targets = Vec::new();
                for o in dataset {
                    for (i, &tau) in o.per_execution.iter().enumerate().step_by(stride) {
                        inputs.push(Input::at(o.x, (i + 1) as f64));
                        targets.push(tau);
                    }
                }
                (inputs, targets, KernelKind::MaternPlusExp)
            }
        };
        Ok(Self {
            training: TrainingSet::standardized(inputs, targets)?,
            kind,
            mode,
            executions: if mode == SurrogateMode::Plain { 1 } else { executions },
            fallback,
            best_total,
        })
    }
}

/// Sums over `ℓ` that do not depend on the query `x`.
#[derive(Debug, Clone)]
struct LocalitySums {
    /// `Σ_ℓ e_ℓᵀ α`
    mean_offset: f64,
    /// `A⁻¹ Σ_ℓ e_ℓ`
    solved_sum: Vec<f64>,
    /// `Σ_ℓ e_ℓᵀ A⁻¹ e_ℓ`
    quad_sum: f64,
    /// `Σ_ℓ k_exp(ℓ, ℓ)`
    prior_sum: f64,
}

/// A surrogate with one fixed hyperparameter vector.
#[derive(Debug, Clone)]
pub struct Surrogate {
    gp: FittedGp,
    executions: usize,
    locality: Option<LocalitySums>,
}

impl Surrogate {
    pub fn fit(data: &SurrogateData, hp: &Hyperparams) -> Result<Self, BoError> {
        let gp = FittedGp::fit(&data.training, hp, data.kind)?;
        let locality = match data.kind {
            KernelKind::Matern => None,
            KernelKind::MaternPlusExp => {
                let inputs = data.training.inputs();
                let n = inputs.len();
                let mut sum = alloc::vec![0.0; n];
                let mut mean_offset = 0.0;
                let mut quad_sum = 0.0;
                let mut prior_sum = 0.0;
                for ell in 1..=data.executions {
                    let l = ell as f64;
                    let e: Vec<f64> = inputs
                        .iter()
                        .map(|p| exp_decay_kernel(l, p.ell, hp.exp_alpha, hp.exp_beta))
                        .collect();
                    mean_offset += e.iter().zip(gp.weights()).map(|(a, b)| a * b).sum::<f64>();
                    quad_sum += gp.factor().quad_form(&e);
                    prior_sum += exp_decay_kernel(l, l, hp.exp_alpha, hp.exp_beta);
                    for (s, v) in sum.iter_mut().zip(&e) {
                        *s += v;
                    }
                }
                Some(LocalitySums {
                    mean_offset,
                    solved_sum: gp.factor().solve(&sum),
                    quad_sum,
                    prior_sum,
                })
            }
        };
        Ok(Self {
            gp,
            executions: data.executions,
            locality,
        })
    }

    pub fn gp(&self) -> &FittedGp {
        &self.gp
    }

    pub fn executions(&self) -> usize {
        self.executions
    }

    /// Predictive mean and variance of `T_total` at `x`.
    pub fn predict_total(&self, x: f64) -> (f64, f64) {
        let Some(loc) = &self.locality else {
            return self.gp.predict(&Input::plain(x));
        };
        let hp = self.gp.hyperparams();
        let inputs = self.gp.training_set().inputs();
        let m: Vec<f64> = inputs
            .iter()
            .map(|p| crate::gp::matern52(&[x], &[p.x], hp.signal_var, hp.lengthscale))
            .collect();
        let l = self.executions as f64;
        let m_alpha: f64 = m.iter().zip(self.gp.weights()).map(|(a, b)| a * b).sum();
        let mean = l * hp.mean + l * m_alpha + loc.mean_offset;
        let cross: f64 = m.iter().zip(&loc.solved_sum).map(|(a, b)| a * b).sum();
        let var = l * hp.signal_var + loc.prior_sum - (l * self.gp.factor().quad_form(&m) + 2.0 * cross + loc.quad_sum);
        let norm = self.gp.training_set().normalization();
        (
            l * norm.offset + norm.scale * mean,
            var.max(0.0) * norm.scale * norm.scale,
        )
    }

    /// Sum of per-execution predictions computed one `ℓ` at a time.
    pub fn predict_total_by_execution(&self, x: f64) -> (f64, f64) {
        if self.locality.is_none() {
            return self.gp.predict(&Input::plain(x));
        }
        (1..=self.executions).fold((0.0, 0.0), |(m, v), ell| {
            let (pm, pv) = self.gp.predict(&Input::at(x, ell as f64));
            (m + pm, v + pv)
        })
    }
}

/// One surrogate per posterior hyperparameter sample, each with its own
/// max-value samples for the acquisition.
#[derive(Debug, Clone)]
pub struct MarginalSurrogate {
    pub data: SurrogateData,
    pub members: Vec<(Surrogate, Vec<f64>)>,
}

impl MarginalSurrogate {
    pub fn acquisition(&self, x: f64) -> f64 {
        let total: f64 = self
            .members
            .iter()
            .map(|(s, ys)| super::mes::mes_acquisition(s, x, ys))
            .sum();
        total / self.members.len() as f64
    }

    /// Posterior mean of `T_total`, averaged over the members.
    pub fn mean_total(&self, x: f64) -> f64 {
        let total: f64 = self.members.iter().map(|(s, _)| s.predict_total(x).0).sum();
        total / self.members.len() as f64
    }
}

/// Fits the surrogate to `dataset`, marginalizing hyperparameters by MCMC.
pub fn build_surrogate(dataset: &[Observation], config: &BoConfig) -> Result<MarginalSurrogate, BoError> {
    let data = SurrogateData::from_observations(dataset, config)?;
    let t = dataset.len() as u64;
    let samples = sample_hyperparams(
        &data.training,
        data.kind,
        config.hp_samples.max(1),
        stream_seed(config.seed, t, 1),
        &config.sampler,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, t, 2));
    let mut members = Vec::with_capacity(samples.len());
    for hp in &samples {
        let s = Surrogate::fit(&data, hp)?;
        let ys = sample_max_values(&s, config.mes_samples.max(1), data.best_total, &mut rng);
        members.push((s, ys));
    }
    Ok(MarginalSurrogate { data, members })
}
