//! Max-value entropy search on the negated objective.
//!
//! We minimize time, so the acquisition works with `g(x) = −T_total(x)` and
//! samples of `g* = max g`. Max values are drawn from a Gumbel fit to
//! `Pr[g* ≤ y] ≈ Π_j Φ((y − μ̃_j)/σ̃_j)` over a grid of candidate points.

use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::Rng;

use super::surrogate::Surrogate;
use crate::math::{inverse_mills_ratio, log_normal_cdf};

/// Candidate points used for the Gumbel fit.
pub const GUMBEL_GRID: usize = 512;

const MIN_STD: f64 = 1e-12;

/// Location and scale of a Gumbel distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gumbel {
    pub location: f64,
    pub scale: f64,
}

impl Gumbel {
    pub fn quantile(&self, u: f64) -> f64 {
        self.location - self.scale * log(-log(u))
    }
}

fn log_max_cdf(y: f64, means: &[f64], stds: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&m, &s) in means.iter().zip(stds) {
        if s < MIN_STD {
            if y < m {
                return f64::NEG_INFINITY;
            }
        } else {
            acc += log_normal_cdf((y - m) / s);
        }
    }
    acc
}

/// Fits a Gumbel distribution to the max of independent normals by matching
/// the quartiles. The max is floored at `floor` (the best value observed).
pub fn fit_gumbel(means: &[f64], stds: &[f64], floor: f64) -> Gumbel {
    let mut hi = floor;
    for (&m, &s) in means.iter().zip(stds) {
        hi = hi.max(m + 8.0 * s);
    }
    let quantile = |q: f64| -> f64 {
        let target = log(q);
        if log_max_cdf(floor, means, stds) >= target {
            return floor;
        }
        let (mut a, mut b) = (floor, hi);
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if log_max_cdf(mid, means, stds) < target {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-14 * (1.0 + b.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    };
    let (q1, q2, q3) = (quantile(0.25), quantile(0.5), quantile(0.75));
    let scale = (q3 - q1) / (log(-log(0.25)) - log(-log(0.75)));
    if !(scale > 0.0) {
        return Gumbel {
            location: q2,
            scale: 0.0,
        };
    }
    Gumbel {
        location: q2 + scale * log(-log(0.5)),
        scale,
    }
}

/// Draws `count` samples of the negated optimum `g*` for `surrogate`.
pub fn sample_max_values<R: Rng>(surrogate: &Surrogate, count: usize, best_total: f64, rng: &mut R) -> Vec<f64> {
    let mut means = Vec::with_capacity(GUMBEL_GRID);
    let mut stds = Vec::with_capacity(GUMBEL_GRID);
    for j in 0..GUMBEL_GRID {
        let x = (j as f64 + 0.5) / GUMBEL_GRID as f64;
        let (m, v) = surrogate.predict_total(x);
        means.push(-m);
        stds.push(sqrt(v));
    }
    let floor = -best_total;
    let gumbel = fit_gumbel(&means, &stds, floor);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            gumbel.quantile(u).max(floor)
        })
        .collect()
}

/// MES utility of a predictive `N(mean, var)` of the time, given samples of
/// the negated optimum.
pub fn mes_utility(mean_total: f64, var_total: f64, max_values: &[f64]) -> f64 {
    let sd = sqrt(var_total.max(0.0));
    if sd < MIN_STD || max_values.is_empty() {
        return 0.0;
    }
    let neg_mean = -mean_total;
    let sum: f64 = max_values
        .iter()
        .map(|&y| {
            let gamma = (y - neg_mean) / sd;
            0.5 * gamma * inverse_mills_ratio(gamma) - log_normal_cdf(gamma)
        })
        .sum();
    (sum / max_values.len() as f64).max(0.0)
}

pub fn mes_acquisition(surrogate: &Surrogate, x: f64, max_values: &[f64]) -> f64 {
    let (m, v) = surrogate.predict_total(x);
    mes_utility(m, v, max_values)
}
