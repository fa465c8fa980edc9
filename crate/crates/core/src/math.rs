//! Scalar helpers for the standard normal distribution.

use libm::{erfc, exp, log, sqrt};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * z * z)
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / core::f64::consts::SQRT_2)
}

/// `ln Φ(z)`, using the Mills-ratio expansion where `Φ` underflows.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        log(normal_cdf(z))
    } else {
        // Φ(z) ≈ φ(z)/|z| · (1 − 1/z² + 3/z⁴)
        let z2 = z * z;
        -0.5 * z2 - log(-z) - 0.5 * log(2.0 * core::f64::consts::PI)
            + log(1.0 - 1.0 / z2 + 3.0 / (z2 * z2))
    }
}

/// `φ(z)/Φ(z)` without cancellation for very negative `z`.
pub fn inverse_mills_ratio(z: f64) -> f64 {
    if z > -30.0 {
        normal_pdf(z) / normal_cdf(z)
    } else {
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2))
    }
}

/// `ln N(x; 0, 1)`.
pub fn log_std_normal(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * log(2.0 * core::f64::consts::PI)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    sqrt(var)
}
