//! Thomas algorithm for tridiagonal systems.
//!
//! The elimination is split into a factorization and a substitution sweep so
//! a matrix that is reused for many right-hand sides is eliminated only once.

use crate::error::{HeliosError, Result};

/// Eliminated form of a tridiagonal matrix.
///
/// Row `i` of the matrix is `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    /// Modified super-diagonal `c'_i = upper_i / pivot_i`.
    upper_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalLu {
    /// `lower[0]` and `upper[n-1]` are ignored.
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n {
            return Err(HeliosError::Data("tridiagonal bands must have equal length".into()));
        }
        let mut upper_scaled = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        for i in 0..n {
            let pivot = if i == 0 { diag[0] } else { diag[i] - lower[i] * upper_scaled[i - 1] };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(HeliosError::Numeric(format!("zero pivot in tridiagonal solve at row {i}")));
            }
            inv_pivot[i] = 1.0 / pivot;
            upper_scaled[i] = if i + 1 < n { upper[i] * inv_pivot[i] } else { 0.0 };
        }
        Ok(Self { lower: lower.to_vec(), upper_scaled, inv_pivot })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        if n == 0 {
            return;
        }
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_scaled[i] * rhs[i + 1];
        }
    }
}

/// One-shot solve of `A x = rhs`, in place.
pub fn solve_in_place(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    TridiagonalLu::new(lower, diag, upper)?.solve(rhs);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn matches_dense_product() {
        let lower = [0.0, -1.0, 0.5, -0.3];
        let diag = [4.0, 5.0, 3.0, 6.0];
        let upper = [1.0, 0.2, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = apply(&lower, &diag, &upper, &x);
        solve_in_place(&lower, &diag, &upper, &mut rhs).unwrap();
        for (a, b) in rhs.iter().zip(x) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn factor_is_reusable() {
        let n = 50;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 + 0.01 * i as f64).collect();
        let diag = vec![3.0; n];
        let upper: Vec<f64> = (0..n).map(|i| -1.0 - 0.01 * i as f64).collect();
        let lu = TridiagonalLu::new(&lower, &diag, &upper).unwrap();
        for k in 0..3 {
            let x: Vec<f64> = (0..n).map(|i| ((i + k) as f64).sin()).collect();
            let mut rhs = apply(&lower, &diag, &upper, &x);
            lu.solve(&mut rhs);
            for (a, b) in rhs.iter().zip(&x) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn reports_zero_pivot() {
        let err = TridiagonalLu::new(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0]);
        assert!(matches!(err, Err(HeliosError::Numeric(_))));
    }
}
