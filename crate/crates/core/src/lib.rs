//! Core algorithms for self-scheduled parallel loops.
//!
//! This crate is `no_std` (it needs `alloc`) and holds everything that is
//! pure computation: chunk-size policies, a virtual-time loop simulator,
//! Gaussian-process regression, the Bayesian-optimization tuner and the
//! regret-based evaluation metrics. Threads, files and the command line live
//! in the `loopsched` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bo;
pub mod chunking;
pub mod eval;
pub mod gp;
pub mod math;
pub mod simulator;

pub use chunking::{ChunkError, ChunkPolicy, LoopShape, Schedule, TaskStats};
