//! Runtime, persistence and offline tuning for self-scheduled parallel loops.
//!
//! [`runtime::Runtime`] executes `parallel_for` loops under a chunking policy
//! chosen through `LOOPSCHED_SCHEDULE` and records the wall time of every
//! execution. [`runtime::Runtime::flush_measurements`] appends those times to
//! a per-loop JSON dataset; the `loopsched` tool reads the dataset, runs one
//! Bayesian-optimization step and writes the FSS parameter for the next run.

pub mod canonical;
pub mod costs;
pub mod dataset;
pub mod error;
pub mod runtime;
pub mod tuner;
pub mod workload;

pub use loopsched_core as core;
pub use runtime::{LoopId, LoopMeasurement, Runtime, RuntimeConfig, ScheduleSetting};
