//! Virtual-time simulation of self-scheduled loop executions.
//!
//! Chunks are handed out in order to whichever worker becomes free first
//! (lowest index on ties). A dispense costs the worker `h` seconds, then the
//! worker runs the chunk's tasks, each slowed by the locality multiplier
//! `g(ℓ) = 1 + c·exp(−λ(ℓ−1))` of the current execution.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Pareto};

use crate::chunking::{ChunkError, LoopShape, Schedule, TaskStats};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("chunk sizes sum to {actual}, expected {expected}")]
    ChunkSumMismatch { expected: usize, actual: usize },
    #[error("zero-sized chunk at position {0}")]
    EmptyChunk(usize),
    #[error("execution index {ell} outside 1..={executions}")]
    ExecutionOutOfRange { ell: usize, executions: usize },
    #[error("invalid workload: {0}")]
    InvalidWorkload(&'static str),
    #[error("empty theta grid")]
    EmptyGrid,
    #[error(transparent)]
    Chunk(#[from] ChunkError),
}

/// Temporal-locality slowdown `g(ℓ) = 1 + c·exp(−λ(ℓ−1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Locality {
    pub amplitude: f64,
    pub decay: f64,
}

impl Locality {
    pub const NONE: Locality = Locality {
        amplitude: 0.0,
        decay: 1.0,
    };

    pub fn new(amplitude: f64, decay: f64) -> Result<Self, SimError> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(SimError::InvalidWorkload("locality amplitude must be >= 0"));
        }
        if !(decay.is_finite() && decay > 0.0) {
            return Err(SimError::InvalidWorkload("locality decay must be > 0"));
        }
        Ok(Self { amplitude, decay })
    }

    pub fn multiplier(&self, ell: usize) -> f64 {
        1.0 + self.amplitude * exp(-self.decay * (ell as f64 - 1.0))
    }
}

/// Distribution family used to draw synthetic task durations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkloadKind {
    Homogeneous { mean: f64 },
    /// Normal durations truncated at zero.
    Gaussian { mean: f64, std_dev: f64 },
    /// Log-normal durations with the given mean and standard deviation.
    Lognormal { mean: f64, std_dev: f64 },
    /// Pareto durations with minimum `scale` and tail index `exponent`.
    PowerLaw { exponent: f64, scale: f64 },
}

impl WorkloadKind {
    pub fn generate(&self, tasks: usize, seed: u64) -> Result<Vec<f64>, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let durations = match *self {
            WorkloadKind::Homogeneous { mean } => {
                if !positive(mean) {
                    return Err(SimError::InvalidWorkload("mean must be positive"));
                }
                alloc::vec![mean; tasks]
            }
            WorkloadKind::Gaussian { mean, std_dev } => {
                let dist = Normal::new(mean, std_dev)
                    .map_err(|_| SimError::InvalidWorkload("invalid gaussian parameters"))?;
                if !positive(mean) {
                    return Err(SimError::InvalidWorkload("mean must be positive"));
                }
                (0..tasks).map(|_| dist.sample(&mut rng).max(0.0)).collect()
            }
            WorkloadKind::Lognormal { mean, std_dev } => {
                if !positive(mean) || !(std_dev.is_finite() && std_dev >= 0.0) {
                    return Err(SimError::InvalidWorkload("invalid lognormal parameters"));
                }
                let cv = std_dev / mean;
                let var_log = log(1.0 + cv * cv);
                let mu_log = log(mean) - 0.5 * var_log;
                let dist = LogNormal::new(mu_log, sqrt(var_log))
                    .map_err(|_| SimError::InvalidWorkload("invalid lognormal parameters"))?;
                (0..tasks).map(|_| dist.sample(&mut rng)).collect()
            }
            WorkloadKind::PowerLaw { exponent, scale } => {
                let dist = Pareto::new(scale, exponent)
                    .map_err(|_| SimError::InvalidWorkload("invalid power-law parameters"))?;
                (0..tasks).map(|_| dist.sample(&mut rng)).collect()
            }
        };
        Ok(durations)
    }
}

/// Everything the simulator needs about one loop site.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorkload {
    durations: Vec<f64>,
    workers: usize,
    overhead: f64,
    locality: Locality,
    executions: usize,
}

impl SyntheticWorkload {
    pub fn new(
        durations: Vec<f64>,
        workers: usize,
        overhead: f64,
        locality: Locality,
        executions: usize,
    ) -> Result<Self, SimError> {
        if durations.is_empty() {
            return Err(SimError::InvalidWorkload("no tasks"));
        }
        if durations.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(SimError::InvalidWorkload("durations must be finite and >= 0"));
        }
        if workers == 0 {
            return Err(SimError::InvalidWorkload("worker count must be >= 1"));
        }
        if !(overhead.is_finite() && overhead >= 0.0) {
            return Err(SimError::InvalidWorkload("overhead must be finite and >= 0"));
        }
        if executions == 0 {
            return Err(SimError::InvalidWorkload("execution count must be >= 1"));
        }
        Ok(Self {
            durations,
            workers,
            overhead,
            locality,
            executions,
        })
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn overhead(&self) -> f64 {
        self.overhead
    }

    pub fn locality(&self) -> Locality {
        self.locality
    }

    pub fn executions(&self) -> usize {
        self.executions
    }

    pub fn shape(&self) -> LoopShape {
        LoopShape::new(self.durations.len(), self.workers).expect("validated at construction")
    }

    /// Empirical task statistics; `None` when the mean duration is zero.
    pub fn task_stats(&self) -> Option<TaskStats> {
        let mean = crate::math::mean(&self.durations);
        TaskStats::new(mean, crate::math::std_dev(&self.durations), self.overhead).ok()
    }
}

/// Finish time of every worker after dispatching `chunks` greedily.
pub fn simulate_dispatch(workload: &SyntheticWorkload, chunks: &[usize], ell: usize) -> Result<Vec<f64>, SimError> {
    let n = workload.durations.len();
    if ell == 0 || ell > workload.executions {
        return Err(SimError::ExecutionOutOfRange {
            ell,
            executions: workload.executions,
        });
    }
    let total: usize = chunks.iter().sum();
    if total != n {
        return Err(SimError::ChunkSumMismatch {
            expected: n,
            actual: total,
        });
    }
    let g = workload.locality.multiplier(ell);
    let mut finish = alloc::vec![0.0f64; workload.workers];
    let mut start = 0usize;
    for (pos, &size) in chunks.iter().enumerate() {
        if size == 0 {
            return Err(SimError::EmptyChunk(pos));
        }
        let work: f64 = workload.durations[start..start + size].iter().sum();
        start += size;
        let mut idle = 0;
        for (w, &t) in finish.iter().enumerate().skip(1) {
            if t < finish[idle] {
                idle = w;
            }
        }
        finish[idle] += workload.overhead + g * work;
    }
    Ok(finish)
}

/// Makespan of one execution of the loop with the given chunk sequence.
pub fn simulate_makespan(workload: &SyntheticWorkload, chunks: &[usize], ell: usize) -> Result<f64, SimError> {
    let finish = simulate_dispatch(workload, chunks, ell)?;
    Ok(finish.into_iter().fold(0.0, f64::max))
}

/// Observation noise on the total time of a run.
///
/// The total receives Gaussian noise with standard deviation `std_dev`; it is
/// spread evenly over the `L` executions (each gets `std_dev/√L`), so the
/// per-execution times still sum to the noisy total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub std_dev: f64,
    pub seed: u64,
}

/// Simulated wall time of every execution `ℓ = 1..=L` of the loop.
pub fn simulate_executions(
    workload: &SyntheticWorkload,
    schedule: &Schedule,
    noise: Option<&Noise>,
) -> Result<Vec<f64>, SimError> {
    let chunks = schedule.chunk_sequence(workload.shape())?;
    let mut times = (1..=workload.executions)
        .map(|ell| simulate_makespan(workload, &chunks, ell))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(noise) = noise.filter(|n| n.std_dev > 0.0) {
        let per_exec = noise.std_dev / sqrt(workload.executions as f64);
        let dist = Normal::new(0.0, per_exec).map_err(|_| SimError::InvalidWorkload("invalid noise level"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for t in &mut times {
            let clean = *t;
            *t = (clean + dist.sample(&mut rng)).max(clean * 1e-3).max(f64::MIN_POSITIVE);
        }
    }
    Ok(times)
}

/// `T_total = Σ_ℓ makespan(ℓ)`, optionally with observation noise.
pub fn simulate_total_time(
    workload: &SyntheticWorkload,
    schedule: &Schedule,
    noise: Option<&Noise>,
) -> Result<f64, SimError> {
    Ok(simulate_executions(workload, schedule, noise)?.iter().sum())
}

/// Exhaustive noise-free search over FSS θ values; ties go to the smaller θ.
pub fn brute_force_best_theta(workload: &SyntheticWorkload, grid: &[f64]) -> Result<(f64, f64), SimError> {
    let mut best: Option<(f64, f64)> = None;
    for &theta in grid {
        let total = simulate_total_time(workload, &Schedule::Factoring { theta }, None)?;
        best = match best {
            Some((bt, bv)) if bv < total || (bv == total && bt <= theta) => Some((bt, bv)),
            _ => Some((theta, total)),
        };
    }
    best.ok_or(SimError::EmptyGrid)
}
