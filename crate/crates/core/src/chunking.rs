//! Chunk-size policies for self-scheduled loops.
//!
//! A [`ChunkPolicy`] is a small state machine that hands out the size of the
//! next chunk each time a worker asks for work. Every policy dispenses chunks
//! in `1..=remaining` and the sizes add up to exactly the loop's task count.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::{ceil, floor, log, pow, round, sqrt};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChunkError {
    #[error("loop has no tasks")]
    EmptyLoop,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

/// Task count and worker count of one loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopShape {
    tasks: usize,
    workers: usize,
}

impl LoopShape {
    pub fn new(tasks: usize, workers: usize) -> Result<Self, ChunkError> {
        if tasks == 0 {
            return Err(ChunkError::EmptyLoop);
        }
        if workers == 0 {
            return Err(ChunkError::NoWorkers);
        }
        Ok(Self { tasks, workers })
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

/// Per-task timing statistics used by the analytic policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskStats {
    /// Mean task time in seconds.
    pub mean: f64,
    /// Standard deviation of the task time in seconds.
    pub std_dev: f64,
    /// Cost of one dequeue from the central queue, in seconds.
    pub overhead: f64,
}

impl TaskStats {
    pub fn new(mean: f64, std_dev: f64, overhead: f64) -> Result<Self, ChunkError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(ChunkError::InvalidParameter {
                name: "mean",
                reason: "must be positive and finite",
            });
        }
        if !(std_dev.is_finite() && std_dev >= 0.0) {
            return Err(ChunkError::InvalidParameter {
                name: "std_dev",
                reason: "must be non-negative and finite",
            });
        }
        if !(overhead.is_finite() && overhead >= 0.0) {
            return Err(ChunkError::InvalidParameter {
                name: "overhead",
                reason: "must be non-negative and finite",
            });
        }
        Ok(Self {
            mean,
            std_dev,
            overhead,
        })
    }

    /// The coefficient of variation `σ/μ`, the classic choice of FSS θ.
    pub fn coefficient_of_variation(&self) -> f64 {
        self.std_dev / self.mean
    }
}

/// A scheduling algorithm together with its parameters.
///
/// The textual form (see [`FromStr`]) is
/// `static | ss | css:<K> | guided | fss:<theta> | fac2 | trap1 | taper3 |
/// tss:<Kf>,<Kl> | taper:<valpha>,<Kmin>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Static,
    SelfScheduling,
    /// Constant chunks of the given size (CSS once the size is known).
    Chunked(usize),
    Guided,
    Factoring { theta: f64 },
    Fac2,
    Trapezoid { first: f64, last: f64 },
    /// Trapezoid with `first = N/(2P)` and `last = 1`.
    Trap1,
    Tapering { v_alpha: f64, min_chunk: usize },
    /// Tapering with `v_alpha = 3` and `min_chunk = 1`.
    Taper3,
}

impl Schedule {
    pub const GRAMMAR: &'static str = "static | ss | css:<K> | guided | fss:<theta> | fac2 | trap1 | taper3 | tss:<Kf>,<Kl> | taper:<valpha>,<Kmin>";

    /// Start dispensing chunks for one execution of a loop.
    pub fn policy(&self, shape: LoopShape) -> Result<ChunkPolicy, ChunkError> {
        ChunkPolicy::new(shape, self)
    }

    /// The full chunk sequence this schedule produces for `shape`.
    pub fn chunk_sequence(&self, shape: LoopShape) -> Result<Vec<usize>, ChunkError> {
        Ok(self.policy(shape)?.collect())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Static => f.write_str("static"),
            Schedule::SelfScheduling => f.write_str("ss"),
            Schedule::Chunked(k) => write!(f, "css:{k}"),
            Schedule::Guided => f.write_str("guided"),
            Schedule::Factoring { theta } => write!(f, "fss:{theta}"),
            Schedule::Fac2 => f.write_str("fac2"),
            Schedule::Trapezoid { first, last } => write!(f, "tss:{first},{last}"),
            Schedule::Trap1 => f.write_str("trap1"),
            Schedule::Tapering { v_alpha, min_chunk } => write!(f, "taper:{v_alpha},{min_chunk}"),
            Schedule::Taper3 => f.write_str("taper3"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized schedule `{input}` ({reason}); accepted forms: {}", Schedule::GRAMMAR)]
pub struct ParseScheduleError {
    pub input: String,
    pub reason: String,
}

impl FromStr for Schedule {
    type Err = ParseScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| ParseScheduleError {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = s.trim();
        let (name, args) = match trimmed.split_once(':') {
            Some((name, args)) => (name, Some(args)),
            None => (trimmed, None),
        };
        let real = |v: &str| -> Result<f64, ParseScheduleError> {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| fail("expected a finite number"))
        };
        let int = |v: &str| -> Result<usize, ParseScheduleError> {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| fail("expected a positive integer"))
        };
        let schedule = match (name.to_ascii_lowercase().as_str(), args) {
            ("static", None) => Schedule::Static,
            ("ss", None) => Schedule::SelfScheduling,
            ("guided", None) => Schedule::Guided,
            ("fac2", None) => Schedule::Fac2,
            ("trap1", None) => Schedule::Trap1,
            ("taper3", None) => Schedule::Taper3,
            ("css", Some(a)) => Schedule::Chunked(int(a)?),
            ("fss", Some(a)) => {
                let theta = real(a)?;
                if theta < 0.0 {
                    return Err(fail("theta must be non-negative"));
                }
                Schedule::Factoring { theta }
            }
            ("tss", Some(a)) => {
                let (f, l) = a.split_once(',').ok_or_else(|| fail("expected two comma-separated values"))?;
                Schedule::Trapezoid {
                    first: real(f)?,
                    last: real(l)?,
                }
            }
            ("taper", Some(a)) => {
                let (v, k) = a.split_once(',').ok_or_else(|| fail("expected two comma-separated values"))?;
                Schedule::Tapering {
                    v_alpha: real(v)?,
                    min_chunk: int(k)?,
                }
            }
            _ => return Err(fail("unknown schedule or wrong arguments")),
        };
        Ok(schedule)
    }
}

#[derive(Debug, Clone)]
enum State {
    Static { base: usize, extra: usize, issued: usize },
    Fixed(usize),
    Guided,
    Factoring { theta: f64, batch: usize, left_in_batch: usize, chunk: usize },
    Fac2 { left_in_batch: usize, chunk: usize },
    Trapezoid { current: f64, step: f64, last: f64 },
    Tapering { v_alpha: f64, min_chunk: usize },
}

/// Stateful chunk dispenser for one loop execution.
#[derive(Debug, Clone)]
pub struct ChunkPolicy {
    remaining: usize,
    workers: usize,
    state: State,
}

fn clamp_chunk(size: usize, remaining: usize) -> usize {
    size.clamp(1, remaining)
}

/// Real-valued chunk estimate → integer in `[1, remaining]`.
fn clamp_real(size: f64, remaining: usize) -> usize {
    if !(size >= 1.0) {
        1
    } else if size >= remaining as f64 {
        remaining
    } else {
        size as usize
    }
}

/// Chunk size of the FSS batch starting with `remaining` tasks.
pub fn fss_batch_chunk(remaining: usize, workers: usize, theta: f64, first_batch: bool) -> usize {
    let r = remaining as f64;
    let p = workers as f64;
    let b = p * theta / (2.0 * sqrt(r));
    let base = if first_batch { 1.0 } else { 2.0 };
    let x = base + b * b + b * sqrt(b * b + 4.0);
    clamp_real(ceil(r / (x * p)), remaining)
}

impl ChunkPolicy {
    pub fn new(shape: LoopShape, schedule: &Schedule) -> Result<Self, ChunkError> {
        let n = shape.tasks;
        let p = shape.workers;
        let state = match *schedule {
            Schedule::Static => State::Static {
                base: n / p,
                extra: n % p,
                issued: 0,
            },
            Schedule::SelfScheduling => State::Fixed(1),
            Schedule::Chunked(k) => {
                if k == 0 {
                    return Err(ChunkError::InvalidParameter {
                        name: "chunk",
                        reason: "must be at least 1",
                    });
                }
                State::Fixed(k)
            }
            Schedule::Guided => State::Guided,
            Schedule::Factoring { theta } => {
                if !theta.is_finite() || theta < 0.0 {
                    return Err(ChunkError::InvalidParameter {
                        name: "theta",
                        reason: "must be non-negative and finite",
                    });
                }
                State::Factoring {
                    theta,
                    batch: 0,
                    left_in_batch: 0,
                    chunk: 0,
                }
            }
            Schedule::Fac2 => State::Fac2 {
                left_in_batch: 0,
                chunk: 0,
            },
            Schedule::Trapezoid { first, last } => trapezoid_state(n, first, last)?,
            Schedule::Trap1 => {
                let first = (n as f64 / (2.0 * p as f64)).max(1.0);
                trapezoid_state(n, first, 1.0)?
            }
            Schedule::Tapering { v_alpha, min_chunk } => tapering_state(v_alpha, min_chunk)?,
            Schedule::Taper3 => tapering_state(3.0, 1)?,
        };
        Ok(Self {
            remaining: n,
            workers: p,
            state,
        })
    }

    /// Tasks not yet dispensed.
    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Size of the next chunk, or `None` once the loop is exhausted.
    pub fn next_chunk(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        let r = self.remaining;
        let p = self.workers;
        let size = match &mut self.state {
            State::Static { base, extra, issued } => {
                let k = *base + usize::from(*issued < *extra);
                *issued += 1;
                k
            }
            State::Fixed(k) => clamp_chunk(*k, r),
            State::Guided => clamp_chunk(r.div_ceil(p), r),
            State::Factoring {
                theta,
                batch,
                left_in_batch,
                chunk,
            } => {
                if *left_in_batch == 0 {
                    *chunk = fss_batch_chunk(r, p, *theta, *batch == 0);
                    *left_in_batch = p;
                    *batch += 1;
                }
                *left_in_batch -= 1;
                clamp_chunk(*chunk, r)
            }
            State::Fac2 { left_in_batch, chunk } => {
                if *left_in_batch == 0 {
                    *chunk = clamp_chunk(r.div_ceil(2 * p), r);
                    *left_in_batch = p;
                }
                *left_in_batch -= 1;
                clamp_chunk(*chunk, r)
            }
            State::Trapezoid { current, step, last } => {
                let k = clamp_real(round(*current), r);
                *current = (*current - *step).max(*last);
                k
            }
            State::Tapering { v_alpha, min_chunk } => {
                let x = r as f64 / p as f64 + *min_chunk as f64 / 2.0;
                let v = *v_alpha;
                let k = floor(x + v * v / 2.0 - v * sqrt(2.0 * x + v * v / 4.0));
                let k = k.max(*min_chunk as f64);
                clamp_real(k, r)
            }
        };
        debug_assert!(size >= 1 && size <= r);
        self.remaining -= size;
        Some(size)
    }
}

fn trapezoid_state(n: usize, first: f64, last: f64) -> Result<State, ChunkError> {
    if !(first.is_finite() && last.is_finite()) {
        return Err(ChunkError::InvalidParameter {
            name: "tss",
            reason: "chunk bounds must be finite",
        });
    }
    if last < 1.0 {
        return Err(ChunkError::InvalidParameter {
            name: "last",
            reason: "must be at least 1",
        });
    }
    if first < last {
        return Err(ChunkError::InvalidParameter {
            name: "first",
            reason: "first chunk must not be smaller than last chunk",
        });
    }
    let step = if n > 1 { (first - last) / (n - 1) as f64 } else { 0.0 };
    Ok(State::Trapezoid {
        current: first,
        step,
        last,
    })
}

fn tapering_state(v_alpha: f64, min_chunk: usize) -> Result<State, ChunkError> {
    if !(v_alpha.is_finite() && v_alpha >= 0.0) {
        return Err(ChunkError::InvalidParameter {
            name: "v_alpha",
            reason: "must be non-negative and finite",
        });
    }
    if min_chunk == 0 {
        return Err(ChunkError::InvalidParameter {
            name: "min_chunk",
            reason: "must be at least 1",
        });
    }
    Ok(State::Tapering { v_alpha, min_chunk })
}

impl Iterator for ChunkPolicy {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        self.next_chunk()
    }
}

pub fn static_chunk_sequence(shape: LoopShape) -> Vec<usize> {
    ChunkPolicy::new(shape, &Schedule::Static)
        .expect("static needs no parameters")
        .collect()
}

pub fn ss_chunk_sequence(shape: LoopShape) -> Vec<usize> {
    ChunkPolicy::new(shape, &Schedule::SelfScheduling)
        .expect("ss needs no parameters")
        .collect()
}

pub fn guided_chunk_sequence(shape: LoopShape) -> Vec<usize> {
    ChunkPolicy::new(shape, &Schedule::Guided)
        .expect("guided needs no parameters")
        .collect()
}

pub fn fss_chunk_sequence(shape: LoopShape, theta: f64) -> Result<Vec<usize>, ChunkError> {
    Schedule::Factoring { theta }.chunk_sequence(shape)
}

pub fn fac2_chunk_sequence(shape: LoopShape) -> Vec<usize> {
    ChunkPolicy::new(shape, &Schedule::Fac2)
        .expect("fac2 needs no parameters")
        .collect()
}

pub fn tss_chunk_sequence(shape: LoopShape, first: f64, last: f64) -> Result<Vec<usize>, ChunkError> {
    Schedule::Trapezoid { first, last }.chunk_sequence(shape)
}

/// TAPER with `v_α = alpha · σ/μ`.
pub fn taper_chunk_sequence(
    shape: LoopShape,
    stats: &TaskStats,
    alpha: f64,
    min_chunk: usize,
) -> Result<Vec<usize>, ChunkError> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(ChunkError::InvalidParameter {
            name: "alpha",
            reason: "must be non-negative and finite",
        });
    }
    let v_alpha = alpha * stats.coefficient_of_variation();
    Schedule::Tapering { v_alpha, min_chunk }.chunk_sequence(shape)
}

/// Fixed CSS chunk size `((h/σ)·√2·N/(P·√ln P))^(2/3)`, rounded and clamped to `[1, N]`.
pub fn css_chunk_size(shape: LoopShape, stats: &TaskStats) -> Result<usize, ChunkError> {
    if stats.std_dev == 0.0 {
        return Err(ChunkError::Degenerate("CSS is undefined for zero task-time deviation"));
    }
    if shape.workers < 2 {
        return Err(ChunkError::Degenerate("CSS is undefined for a single worker"));
    }
    let n = shape.tasks as f64;
    let p = shape.workers as f64;
    let base = (stats.overhead / stats.std_dev) * core::f64::consts::SQRT_2 * n / (p * sqrt(log(p)));
    let k = pow(base, 2.0 / 3.0);
    Ok(clamp_real(round(k), shape.tasks))
}
