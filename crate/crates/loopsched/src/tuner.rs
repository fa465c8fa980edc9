//! The offline tuner: one BO step on a stored dataset, simulator-backed
//! closed-loop tuning, and dataset reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use loopsched_core::bo::{
    bo_run_closed_loop, bo_step, posterior_mean_argmin, reparam, BoConfig, BoError, ClosedLoopFailure, SurrogateMode,
    TraceEntry,
};
use loopsched_core::simulator::{brute_force_best_theta, simulate_executions, SimError};
use loopsched_core::Schedule;

use crate::canonical::format_float;
use crate::dataset::{load_dataset, next_param_path, save_next_param, DatasetError, DatasetLock, NextParamFile};
use crate::workload::WorkloadSpec;

pub const PRODUCED_BY: &str = concat!("loopsched ", env!("CARGO_PKG_VERSION"));

/// Points of the reference grid used to find the simulator optimum.
pub const REFERENCE_GRID: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum TunerError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Bo(#[from] BoError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Command-line adjustments to a dataset's stored configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfigOverrides {
    pub locality: bool,
    pub seed: Option<u64>,
    pub n_iters: Option<usize>,
    pub n_init: Option<usize>,
}

impl ConfigOverrides {
    pub fn apply(&self, mut c: BoConfig) -> BoConfig {
        if self.locality {
            c.surrogate = SurrogateMode::LocalityAware;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.n_iters {
            c.n_iters = n;
        }
        if let Some(n) = self.n_init {
            c.n_init = n;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub next: NextParamFile,
    pub path: PathBuf,
    pub warmup: bool,
    /// Lowest observed total so far.
    pub incumbent: Option<f64>,
    /// Set when a locality-aware model was requested but not possible.
    pub fallback: Option<String>,
}

impl Suggestion {
    pub fn summary_line(&self) -> String {
        let inc = self.incumbent.map_or_else(|| "none".to_string(), |v| format!("{v:.6e}"));
        format!(
            "t={} x_next={:.6} theta_next={:.6} incumbent={inc}{}",
            self.next.source_iteration_count,
            self.next.x_next,
            self.next.theta_next,
            if self.warmup { " (warm-up)" } else { "" }
        )
    }
}

/// Runs one BO step on the dataset at `path` and writes
/// `<loop_id>.next.json` beside it. The dataset itself is never modified.
pub fn suggest(path: &Path, overrides: &ConfigOverrides) -> Result<Suggestion, TunerError> {
    let _lock = DatasetLock::acquire(path)?;
    let file = load_dataset(path)?;
    let config = overrides.apply(file.config.to_config());
    let observations = file.observations()?;
    let p = bo_step(&observations, &config)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let out = next_param_path(dir, &file.loop_id);
    let next = NextParamFile {
        loop_id: file.loop_id.clone(),
        x_next: p.x,
        theta_next: p.theta,
        produced_by: PRODUCED_BY.into(),
        source_iteration_count: file.iterations.len(),
    };
    save_next_param(&out, &next)?;
    Ok(Suggestion {
        next,
        path: out,
        warmup: p.warmup,
        incumbent: file.incumbent().map(|i| file.iterations[i].total_s),
        fallback: p.fallback.map(|f| format!("{f:?}")),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub trace: Vec<TraceEntry>,
    pub best_x: f64,
    pub best_theta: f64,
    pub best_total: f64,
    /// Best known θ: the reference-grid optimum, or the tuned θ if it is better.
    pub optimal_theta: f64,
    pub optimal_total: f64,
    /// `(tuned − optimal)/optimal × 100`.
    pub regret_pct: f64,
    /// θ = σ/μ of the simulated task durations.
    pub analytic_theta: Option<f64>,
    pub analytic_total: Option<f64>,
}

impl TuneReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,x,theta,total_s\n");
        for e in &self.trace {
            let _ = writeln!(out, "{},{},{},{}", e.t, format_float(e.x), format_float(e.theta), format_float(e.total));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "evaluations: {}", self.trace.len());
        let _ = writeln!(out, "tuned:   theta={:.6} x={:.6} total_s={:.9e}", self.best_theta, self.best_x, self.best_total);
        let _ = writeln!(out, "optimal: theta={:.6} total_s={:.9e}", self.optimal_theta, self.optimal_total);
        if let (Some(t), Some(v)) = (self.analytic_theta, self.analytic_total) {
            let _ = writeln!(out, "sigma/mu: theta={t:.6} total_s={v:.9e}");
        }
        let _ = writeln!(out, "regret: {:.4}%", self.regret_pct);
        out
    }
}

/// θ values of the reference grid, evenly spaced in the search coordinate.
pub fn reference_grid() -> Vec<f64> {
    (0..REFERENCE_GRID)
        .map(|i| reparam((i as f64 + 0.5) / REFERENCE_GRID as f64).expect("grid is inside (0, 1)"))
        .collect()
}

/// Tunes FSS against the noise-free simulator.
pub fn tune_sim(spec: &WorkloadSpec, config: &BoConfig) -> Result<TuneReport, TunerError> {
    let w = spec.build()?;
    let run = bo_run_closed_loop(
        |_, theta| simulate_executions(&w, &Schedule::Factoring { theta }, None),
        config,
    )
    .map_err(|e| match e.failure {
        ClosedLoopFailure::Objective(s) => TunerError::Sim(s),
        ClosedLoopFailure::Bo(b) => TunerError::Bo(b),
    })?;
    let (grid_theta, grid_total) = brute_force_best_theta(&w, &reference_grid())?;
    let (optimal_theta, optimal_total) = if run.best_total < grid_total {
        (run.best_theta, run.best_total)
    } else {
        (grid_theta, grid_total)
    };
    let analytic_theta = w.task_stats().map(|s| s.coefficient_of_variation());
    let analytic_total = match analytic_theta {
        Some(theta) => Some(simulate_executions(&w, &Schedule::Factoring { theta }, None)?.iter().sum()),
        None => None,
    };
    Ok(TuneReport {
        regret_pct: (run.best_total - optimal_total) / optimal_total * 100.0,
        trace: run.trace,
        best_x: run.best_x,
        best_theta: run.best_theta,
        best_total: run.best_total,
        optimal_theta,
        optimal_total,
        analytic_theta,
        analytic_total,
    })
}

/// Human-readable summary of a dataset, or plot-ready CSV with `csv`.
pub fn report(path: &Path, csv: bool) -> Result<String, TunerError> {
    let file = load_dataset(path)?;
    if csv {
        let mut out = String::from("iter,x,theta,total_s,best_s\n");
        let mut best = f64::INFINITY;
        for (i, it) in file.iterations.iter().enumerate() {
            best = best.min(it.total_s);
            let _ = writeln!(
                out,
                "{i},{},{},{},{}",
                format_float(it.x),
                format_float(it.theta),
                format_float(it.total_s),
                format_float(best)
            );
        }
        return Ok(out);
    }
    let Some(inc) = file.incumbent() else {
        return Ok(format!("loop {}: no observations\n", file.loop_id));
    };
    let mut out = String::new();
    let _ = writeln!(out, "loop {}: {} iterations", file.loop_id, file.iterations.len());
    let b = &file.iterations[inc];
    let _ = writeln!(out, "incumbent: iteration {inc} x={:.6} theta={:.6} total_s={:.9e}", b.x, b.theta, b.total_s);
    let observations = file.observations()?;
    match posterior_mean_argmin(&observations, &file.config.to_config()) {
        Ok((x, mean)) => {
            let _ = writeln!(out, "posterior-mean argmin: x={x:.6} theta={:.6} predicted total_s={mean:.9e}", reparam(x)?);
        }
        Err(e) => {
            let _ = writeln!(out, "posterior-mean argmin: unavailable ({e})");
        }
    }
    for (i, it) in file.iterations.iter().enumerate() {
        let _ = writeln!(out, "  {i:>3}  x={:.6} theta={:.6} L={} total_s={:.9e}", it.x, it.theta, it.measurements.len(), it.total_s);
    }
    Ok(out)
}
