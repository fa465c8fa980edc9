#![allow(dead_code)]

use loopsched::dataset::{ConfigSnapshot, Iteration, LoopDatasetFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A valid dataset with up to `max_iters` iterations of up to `max_l` executions.
pub fn random_dataset(seed: u64, max_iters: usize, max_l: usize) -> LoopDatasetFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = format!("src/k{}.c:{}:{}", rng.random_range(0..100), rng.random_range(1..500), rng.random_range(1..80));
    let n = rng.random_bool(0.8).then(|| rng.random_range(1..1_000_000u64));
    let mut file = LoopDatasetFile::new(id, n, ConfigSnapshot::default());
    file.config.seed = rng.random();
    for _ in 0..rng.random_range(0..=max_iters) {
        let x = rng.random_range(1e-6..1.0 - 1e-6);
        let l = rng.random_range(1..=max_l);
        let taus: Vec<f64> = (0..l).map(|_| 10f64.powf(rng.random_range(-7.0..1.0))).collect();
        let uuid = format!("{:032x}", rng.random::<u128>());
        file.iterations.push(Iteration::new(uuid, x, &taus).unwrap());
    }
    file
}
