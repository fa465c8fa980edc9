//! One-dimensional Sobol points (the base-2 van der Corput sequence).

use alloc::vec::Vec;

/// Points are kept this far from the ends of the unit interval.
pub const DOMAIN_MARGIN: f64 = 1e-6;

/// The `index`-th point (0-based) of the sequence with the initial `0` skipped:
/// 0.5, 0.25, 0.75, 0.125, …
pub fn sobol_point(index: usize) -> f64 {
    let i = (index as u64).wrapping_add(1);
    let v = i.reverse_bits() as f64 / 18_446_744_073_709_551_616.0;
    v.clamp(DOMAIN_MARGIN, 1.0 - DOMAIN_MARGIN)
}

pub fn sobol_init(n: usize) -> Vec<f64> {
    (0..n).map(sobol_point).collect()
}
