//! Bayesian optimization of the FSS parameter.
//!
//! The search runs over `x ∈ (0, 1)` and evaluates `θ = 2^(19x − 10)`. The
//! first `n_init` proposals are Sobol points; after that each step fits a GP
//! surrogate of the total loop time, marginalizes its hyperparameters by MCMC
//! and maximizes the MES acquisition with DIRECT.

pub mod direct;
pub mod mes;
pub mod sobol;
pub mod surrogate;

use alloc::vec::Vec;

use libm::{exp2, log2};

use crate::gp::{GpError, SamplerConfig};
pub use direct::{direct_maximize, DirectOptions, DirectResult, NonFiniteValue};
pub use sobol::{sobol_init, sobol_point, DOMAIN_MARGIN};
pub use surrogate::{build_surrogate, subsample_stride, MarginalSurrogate, Surrogate, SurrogateData, SurrogateFallback};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateMode {
    /// GP over `x` fitted to run totals.
    Plain,
    /// GP over `(x, ℓ)` fitted to individual executions.
    LocalityAware,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    pub n_init: usize,
    pub n_iters: usize,
    pub surrogate: SurrogateMode,
    /// Stride along `ℓ`; `None` picks `max(1, round(L/4))`.
    pub subsample_k: Option<usize>,
    pub mes_samples: usize,
    pub hp_samples: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub inner: DirectOptions,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: 4,
            n_iters: 20,
            surrogate: SurrogateMode::Plain,
            subsample_k: None,
            mes_samples: 10,
            hp_samples: 10,
            seed: 0,
            sampler: SamplerConfig::default(),
            inner: DirectOptions::default(),
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<(), BoError> {
        if self.n_init == 0 {
            return Err(BoError::InvalidConfig("n_init must be at least 1"));
        }
        if self.mes_samples == 0 {
            return Err(BoError::InvalidConfig("mes_samples must be at least 1"));
        }
        if self.hp_samples == 0 {
            return Err(BoError::InvalidConfig("hp_samples must be at least 1"));
        }
        if self.subsample_k == Some(0) {
            return Err(BoError::InvalidConfig("subsample_k must be positive"));
        }
        if self.sampler.thin == 0 {
            return Err(BoError::InvalidConfig("sampler thinning must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoError {
    #[error("dataset has no observations")]
    EmptyDataset,
    #[error("x = {0} is outside the open unit interval")]
    Domain(f64),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("acquisition is not finite at x = {x}")]
    NonFiniteAcquisition { x: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid observation: {0}")]
    InvalidObservation(&'static str),
}

/// `θ(x) = 2^(19x − 10)` on `0 < x < 1`.
pub fn reparam(x: f64) -> Result<f64, BoError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(BoError::Domain(x));
    }
    Ok(exp2(19.0 * x - 10.0))
}

pub fn inverse_reparam(theta: f64) -> Result<f64, BoError> {
    let x = (log2(theta) + 10.0) / 19.0;
    if !(x > 0.0 && x < 1.0) {
        return Err(BoError::Domain(x));
    }
    Ok(x)
}

/// Seed for an independent random stream at iteration `t`.
pub fn stream_seed(seed: u64, t: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One evaluated parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub theta: f64,
    /// `τ_ℓ` for `ℓ = 1..=L`, in order.
    pub per_execution: Vec<f64>,
    pub total: f64,
}

impl Observation {
    pub fn new(x: f64, per_execution: Vec<f64>) -> Result<Self, BoError> {
        let theta = reparam(x)?;
        if per_execution.is_empty() {
            return Err(BoError::InvalidObservation("no executions"));
        }
        if per_execution.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(BoError::InvalidObservation("execution times must be finite and non-negative"));
        }
        let total = per_execution.iter().sum();
        Ok(Self {
            x,
            theta,
            per_execution,
            total,
        })
    }

    pub fn executions(&self) -> usize {
        self.per_execution.len()
    }
}

/// Maximizes `acquisition` over the search interval.
pub fn inner_optimize<F: FnMut(f64) -> f64>(acquisition: F, opts: &DirectOptions) -> Result<DirectResult, BoError> {
    direct_maximize(acquisition, opts).map_err(|e| BoError::NonFiniteAcquisition { x: e.x })
}

/// Acquisition at `x`, averaged over hyperparameter samples.
pub fn marginalized_acquisition(dataset: &[Observation], x: f64, config: &BoConfig) -> Result<f64, BoError> {
    config.validate()?;
    Ok(build_surrogate(dataset, config)?.acquisition(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub x: f64,
    pub theta: f64,
    /// The point came from the Sobol warm-up rather than the acquisition.
    pub warmup: bool,
    pub acquisition: Option<f64>,
    pub fallback: Option<SurrogateFallback>,
}

/// Next parameter to evaluate given `dataset`.
pub fn bo_step(dataset: &[Observation], config: &BoConfig) -> Result<Proposal, BoError> {
    config.validate()?;
    if dataset.len() < config.n_init {
        let x = sobol_point(dataset.len());
        return Ok(Proposal {
            x,
            theta: reparam(x)?,
            warmup: true,
            acquisition: None,
            fallback: None,
        });
    }
    let model = build_surrogate(dataset, config)?;
    let best = inner_optimize(|x| model.acquisition(x), &config.inner)?;
    let x = best.x.clamp(DOMAIN_MARGIN, 1.0 - DOMAIN_MARGIN);
    Ok(Proposal {
        x,
        theta: reparam(x)?,
        warmup: false,
        acquisition: Some(best.value),
        fallback: model.data.fallback,
    })
}

/// Minimizer of the marginal posterior mean of `T_total` and its value.
pub fn posterior_mean_argmin(dataset: &[Observation], config: &BoConfig) -> Result<(f64, f64), BoError> {
    config.validate()?;
    let model = build_surrogate(dataset, config)?;
    let best = inner_optimize(|x| -model.mean_total(x), &config.inner)?;
    Ok((best.x, -best.value))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub t: usize,
    pub x: f64,
    pub theta: f64,
    pub total: f64,
    pub best_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoRun {
    pub best_x: f64,
    pub best_theta: f64,
    pub best_total: f64,
    pub trace: Vec<TraceEntry>,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClosedLoopFailure<E> {
    Objective(E),
    Bo(BoError),
}

/// A closed loop that stopped early, with everything evaluated before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopError<E> {
    pub trace: Vec<TraceEntry>,
    pub failure: ClosedLoopFailure<E>,
}

impl<E: core::fmt::Display> core::fmt::Display for ClosedLoopError<E> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match &self.failure {
            ClosedLoopFailure::Objective(e) => write!(f, "objective failed after {} evaluations: {e}", self.trace.len()),
            ClosedLoopFailure::Bo(e) => write!(f, "optimizer failed after {} evaluations: {e}", self.trace.len()),
        }
    }
}

impl<E: core::fmt::Debug + core::fmt::Display> core::error::Error for ClosedLoopError<E> {}

/// Runs `n_init + n_iters` evaluations of `objective`, which returns the
/// per-execution times for a given `(x, θ)`.
pub fn bo_run_closed_loop<E, F>(mut objective: F, config: &BoConfig) -> Result<BoRun, ClosedLoopError<E>>
where
    F: FnMut(f64, f64) -> Result<Vec<f64>, E>,
{
    let mut observations: Vec<Observation> = Vec::new();
    let mut trace = Vec::new();
    let mut best: Option<usize> = None;
    let fail = |trace: &Vec<TraceEntry>, failure| ClosedLoopError {
        trace: trace.clone(),
        failure,
    };
    if let Err(e) = config.validate() {
        return Err(fail(&trace, ClosedLoopFailure::Bo(e)));
    }
    for t in 0..config.n_init + config.n_iters {
        let p = bo_step(&observations, config).map_err(|e| fail(&trace, ClosedLoopFailure::Bo(e)))?;
        let times = objective(p.x, p.theta).map_err(|e| fail(&trace, ClosedLoopFailure::Objective(e)))?;
        let obs = Observation::new(p.x, times).map_err(|e| fail(&trace, ClosedLoopFailure::Bo(e)))?;
        if best.is_none_or(|b| obs.total < observations[b].total) {
            best = Some(observations.len());
        }
        observations.push(obs);
        let b = &observations[best.unwrap_or(0)];
        let last = &observations[observations.len() - 1];
        trace.push(TraceEntry {
            t,
            x: last.x,
            theta: last.theta,
            total: last.total,
            best_total: b.total,
        });
    }
    let Some(b) = best else {
        return Err(fail(&trace, ClosedLoopFailure::Bo(BoError::EmptyDataset)));
    };
    let b = &observations[b];
    Ok(BoRun {
        best_x: b.x,
        best_theta: b.theta,
        best_total: b.total,
        trace,
        observations,
    })
}
