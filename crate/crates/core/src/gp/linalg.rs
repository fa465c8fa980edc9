use alloc::vec::Vec;

use libm::{log, sqrt};

/// Lower-triangular Cholesky factor of a dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors the row-major `n × n` matrix `a`. Fails if any pivot is not
    /// above `min_pivot`.
    pub fn factor(a: &[f64], n: usize, min_pivot: f64) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = alloc::vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > min_pivot) || !d.is_finite() {
                return None;
            }
            let ljj = sqrt(d);
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Some(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&z[..i]).map(|(l, v)| l * v).sum();
            z[i] = (z[i] - s) / self.lower[i * n + i];
        }
        z
    }

    /// Solves `A x = b` with `A = L Lᵀ`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        x
    }

    /// `bᵀ A⁻¹ b`.
    pub fn quad_form(&self, b: &[f64]) -> f64 {
        self.solve_lower(b).iter().map(|v| v * v).sum()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| log(self.lower[i * self.n + i])).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let c = Cholesky::factor(&a, 3, 0.0).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let det = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.4) + 0.4 * (2.0 - 5.0 * 0.4);
        assert!((c.log_det() - libm::log(det)).abs() < 1e-12);
        let q: f64 = b.iter().zip(&x).map(|(u, v)| u * v).sum();
        assert!((c.quad_form(&b) - q).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular() {
        assert!(Cholesky::factor(&[1.0, 1.0, 1.0, 1.0], 2, 1e-12).is_none());
        assert!(Cholesky::factor(&[-1.0], 1, 0.0).is_none());
    }
}
