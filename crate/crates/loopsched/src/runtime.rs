//! A `parallel_for` executor that self-schedules chunks onto a fixed pool of
//! workers and records the wall time of every loop execution.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use loopsched_core::bo::{inverse_reparam, reparam, sobol_point};
use loopsched_core::{ChunkError, ChunkPolicy, LoopShape, Schedule};
use uuid::Uuid;

use crate::dataset::{
    dataset_path, load_dataset, load_next_param, next_param_path, save_dataset, ConfigSnapshot, DatasetError,
    DatasetLock, Iteration, LoopDatasetFile,
};

pub const SCHEDULE_VAR: &str = "LOOPSCHED_SCHEDULE";
pub const THREADS_VAR: &str = "LOOPSCHED_THREADS";
pub const DATA_DIR_VAR: &str = "LOOPSCHED_DATA_DIR";

/// Identifies one lexical loop site across program runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoopId(String);

impl LoopId {
    pub fn new(id: impl Into<String>) -> Result<Self, RuntimeError> {
        let id = id.into();
        if id.is_empty() {
            return Err(RuntimeError::EmptyLoopId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A [`LoopId`] derived from the call site, `file:line:column`.
#[macro_export]
macro_rules! loop_id {
    () => {
        $crate::runtime::LoopId::new(concat!(file!(), ":", line!(), ":", column!())).expect("non-empty")
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopMeasurement {
    pub loop_id: LoopId,
    /// 1-based execution index within this process.
    pub ell: u64,
    /// Seconds from loop entry until every worker has finished.
    pub tau: f64,
    pub tasks: usize,
    pub schedule: Schedule,
    /// FSS parameter, when the schedule is FSS.
    pub theta: Option<f64>,
    /// Search-space coordinate of `theta`, when it has one.
    pub x: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("loop id must be non-empty")]
    EmptyLoopId,
    #[error("loop {0} has an empty iteration range")]
    EmptyRange(LoopId),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error("a task of loop {loop_id} panicked: {message}")]
    TaskPanicked { loop_id: LoopId, message: String },
    #[error("{var}: {reason}")]
    Config { var: &'static str, reason: String },
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("loop {0} ran with more than one parameter in this run")]
    MixedParameters(LoopId),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Where the schedule of each loop comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSetting {
    Fixed(Schedule),
    /// FSS with the tuner's latest proposal from `<loop_id>.next.json`.
    BoFss,
}

impl Default for ScheduleSetting {
    fn default() -> Self {
        ScheduleSetting::Fixed(Schedule::Fac2)
    }
}

impl FromStr for ScheduleSetting {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::default());
        }
        if s == "bo_fss" {
            return Ok(ScheduleSetting::BoFss);
        }
        s.parse().map(ScheduleSetting::Fixed).map_err(|e| RuntimeError::Config {
            var: SCHEDULE_VAR,
            reason: format!("{e}; `bo_fss` is also accepted"),
        })
    }
}

/// Reads `LOOPSCHED_SCHEDULE`; unset or empty means FAC2.
pub fn resolve_policy_from_env() -> Result<ScheduleSetting, RuntimeError> {
    match std::env::var(SCHEDULE_VAR) {
        Ok(v) => v.parse(),
        Err(std::env::VarError::NotPresent) => Ok(ScheduleSetting::default()),
        Err(e) => Err(RuntimeError::Config {
            var: SCHEDULE_VAR,
            reason: e.to_string(),
        }),
    }
}

fn threads_from_env() -> Result<Option<usize>, RuntimeError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RuntimeError::Config {
                var: THREADS_VAR,
                reason: format!("expected a positive integer, got {v:?}"),
            }),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(RuntimeError::Config {
            var: THREADS_VAR,
            reason: e.to_string(),
        }),
    }
}

pub fn hardware_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub workers: usize,
    pub setting: ScheduleSetting,
    pub data_dir: PathBuf,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            workers: hardware_threads(),
            setting: ScheduleSetting::default(),
            data_dir: PathBuf::from("."),
        }
    }
}

impl RuntimeConfig {
    pub fn from_env() -> Result<Self, RuntimeError> {
        Ok(Self {
            workers: threads_from_env()?.unwrap_or_else(hardware_threads),
            setting: resolve_policy_from_env()?,
            data_dir: std::env::var_os(DATA_DIR_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from),
        })
    }
}

#[derive(Debug, Default)]
struct LoopRecord {
    /// Schedule chosen for this loop on first use in this run.
    resolved: Option<(Schedule, Option<f64>)>,
    measurements: Vec<LoopMeasurement>,
}

struct Dispenser {
    policy: ChunkPolicy,
    next: usize,
    trace: Option<Vec<Range<usize>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

/// A worker pool plus the measurements of the current program run.
pub struct Runtime {
    pool: rayon::ThreadPool,
    config: RuntimeConfig,
    run_id: Uuid,
    loops: Mutex<HashMap<LoopId, LoopRecord>>,
}

impl fmt::Debug for Runtime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runtime")
            .field("config", &self.config)
            .field("run_id", &self.run_id)
            .finish_non_exhaustive()
    }
}

impl Runtime {
    pub fn new(config: RuntimeConfig) -> Result<Self, RuntimeError> {
        if config.workers == 0 {
            return Err(RuntimeError::Config {
                var: THREADS_VAR,
                reason: "worker count must be positive".into(),
            });
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .thread_name(|i| format!("loopsched-{i}"))
            .build()
            .map_err(|e| RuntimeError::Pool(e.to_string()))?;
        Ok(Self {
            pool,
            config,
            run_id: Uuid::new_v4(),
            loops: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_env() -> Result<Self, RuntimeError> {
        Self::new(RuntimeConfig::from_env()?)
    }

    pub fn workers(&self) -> usize {
        self.config.workers
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.config
    }

    pub fn run_id(&self) -> Uuid {
        self.run_id
    }

    fn resolve(&self, id: &LoopId) -> Result<(Schedule, Option<f64>), RuntimeError> {
        if let Some(r) = lock(&self.loops).get(id).and_then(|r| r.resolved) {
            return Ok(r);
        }
        let resolved = match self.config.setting {
            ScheduleSetting::Fixed(s) => {
                let x = match s {
                    Schedule::Factoring { theta } => inverse_reparam(theta).ok(),
                    _ => None,
                };
                (s, x)
            }
            ScheduleSetting::BoFss => {
                let path = next_param_path(&self.config.data_dir, id.as_str());
                let x = if path.exists() {
                    load_next_param(&path)?.x_next
                } else {
                    log::warn!("{} not found; using the first warm-up point", path.display());
                    sobol_point(0)
                };
                let theta = reparam(x).map_err(|e| RuntimeError::Config {
                    var: SCHEDULE_VAR,
                    reason: e.to_string(),
                })?;
                (Schedule::Factoring { theta }, Some(x))
            }
        };
        lock(&self.loops).entry(id.clone()).or_default().resolved = Some(resolved);
        Ok(resolved)
    }

    /// Runs `body(i)` for every `i` in `0..tasks` under the configured schedule.
    pub fn parallel_for<F>(&self, id: &LoopId, tasks: usize, body: F) -> Result<LoopMeasurement, RuntimeError>
    where
        F: Fn(usize) + Sync,
    {
        let (schedule, x) = self.resolve(id)?;
        self.execute(id, tasks, schedule, x, body, false).map(|(m, _)| m)
    }

    /// Like [`Runtime::parallel_for`] with an explicit schedule.
    pub fn parallel_for_with<F>(
        &self,
        id: &LoopId,
        tasks: usize,
        schedule: &Schedule,
        body: F,
    ) -> Result<LoopMeasurement, RuntimeError>
    where
        F: Fn(usize) + Sync,
    {
        self.execute(id, tasks, *schedule, x_of(schedule), body, false).map(|(m, _)| m)
    }

    /// Also returns the dispensed chunks in dispatch order.
    pub fn parallel_for_traced<F>(
        &self,
        id: &LoopId,
        tasks: usize,
        schedule: &Schedule,
        body: F,
    ) -> Result<(LoopMeasurement, Vec<Range<usize>>), RuntimeError>
    where
        F: Fn(usize) + Sync,
    {
        self.execute(id, tasks, *schedule, x_of(schedule), body, true)
    }

    fn execute<F>(
        &self,
        id: &LoopId,
        tasks: usize,
        schedule: Schedule,
        x: Option<f64>,
        body: F,
        traced: bool,
    ) -> Result<(LoopMeasurement, Vec<Range<usize>>), RuntimeError>
    where
        F: Fn(usize) + Sync,
    {
        if tasks == 0 {
            return Err(RuntimeError::EmptyRange(id.clone()));
        }
        let shape = LoopShape::new(tasks, self.config.workers)?;
        let dispenser = Mutex::new(Dispenser {
            policy: schedule.policy(shape)?,
            next: 0,
            trace: traced.then(Vec::new),
        });
        let abort = AtomicBool::new(false);
        let failure: Mutex<Option<String>> = Mutex::new(None);
        let start = Instant::now();
        self.pool.broadcast(|_| {
            let run = catch_unwind(AssertUnwindSafe(|| {
                while !abort.load(Ordering::Relaxed) {
                    let range = {
                        let mut d = lock(&dispenser);
                        let Some(k) = d.policy.next_chunk() else { break };
                        let r = d.next..d.next + k;
                        d.next += k;
                        if let Some(t) = d.trace.as_mut() {
                            t.push(r.clone());
                        }
                        r
                    };
                    for i in range {
                        body(i);
                    }
                }
            }));
            if let Err(p) = run {
                abort.store(true, Ordering::Relaxed);
                lock(&failure).get_or_insert_with(|| panic_message(p.as_ref()));
            }
        });
        let tau = start.elapsed().as_secs_f64().max(1e-9);
        if let Some(message) = lock(&failure).take() {
            return Err(RuntimeError::TaskPanicked {
                loop_id: id.clone(),
                message,
            });
        }
        let trace = dispenser.into_inner().unwrap_or_else(|e| e.into_inner()).trace.unwrap_or_default();
        let mut loops = lock(&self.loops);
        let record = loops.entry(id.clone()).or_default();
        let m = LoopMeasurement {
            loop_id: id.clone(),
            ell: record.measurements.len() as u64 + 1,
            tau,
            tasks,
            schedule,
            theta: match schedule {
                Schedule::Factoring { theta } => Some(theta),
                _ => None,
            },
            x,
        };
        record.measurements.push(m.clone());
        Ok((m, trace))
    }

    /// Measurements recorded so far for `id`, in execution order.
    pub fn measurements(&self, id: &LoopId) -> Vec<LoopMeasurement> {
        lock(&self.loops).get(id).map(|r| r.measurements.clone()).unwrap_or_default()
    }

    /// Appends this run's measurements to the datasets in the configured data
    /// directory. See [`Runtime::flush_measurements_to`].
    pub fn flush_measurements(&self) -> Result<usize, RuntimeError> {
        self.flush_measurements_to(&self.config.data_dir)
    }

    /// Appends one iteration per FSS-scheduled loop to `<dir>/<loop_id>.json`
    /// and returns the number of measurements written. Loops without a
    /// search-space parameter are skipped. A dataset that already holds this
    /// run is left alone, so repeated flushes are no-ops.
    pub fn flush_measurements_to(&self, dir: &Path) -> Result<usize, RuntimeError> {
        let loops: Vec<(LoopId, Vec<LoopMeasurement>)> = {
            let guard = lock(&self.loops);
            let mut v: Vec<_> = guard
                .iter()
                .filter(|(_, r)| !r.measurements.is_empty())
                .map(|(k, r)| (k.clone(), r.measurements.clone()))
                .collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        };
        let run = self.run_id.to_string();
        let mut written = 0;
        for (id, ms) in loops {
            let Some(x) = ms[0].x else {
                log::debug!("loop {id} has no tunable parameter; not recorded");
                continue;
            };
            if ms.iter().any(|m| m.x != Some(x)) {
                return Err(RuntimeError::MixedParameters(id));
            }
            let path = dataset_path(dir, id.as_str());
            let _lock = DatasetLock::acquire(&path)?;
            let tasks = ms[0].tasks;
            let mut file = if path.exists() {
                load_dataset(&path)?
            } else {
                LoopDatasetFile::new(id.as_str(), Some(tasks as u64), ConfigSnapshot::default())
            };
            if file.iterations.iter().any(|it| it.run_uuid == run) {
                continue;
            }
            if file.n != Some(tasks as u64) || ms.iter().any(|m| m.tasks != tasks) {
                file.n = None;
            }
            let taus: Vec<f64> = ms.iter().map(|m| m.tau).collect();
            let it = Iteration::new(run.clone(), x, &taus).map_err(|e| RuntimeError::Config {
                var: SCHEDULE_VAR,
                reason: e.to_string(),
            })?;
            file.iterations.push(it);
            save_dataset(&path, &file)?;
            written += ms.len();
        }
        Ok(written)
    }
}

fn x_of(schedule: &Schedule) -> Option<f64> {
    match *schedule {
        Schedule::Factoring { theta } => inverse_reparam(theta).ok(),
        _ => None,
    }
}
