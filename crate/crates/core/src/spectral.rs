//! Eigenpairs of the radial operator `u'' + (2/r) u'` on `[0, R0]` with a
//! Dirichlet condition at `R0`, and the `r^2`-weighted projections built on them.
//!
//! `lambda_n = (n pi / R0)^2` and
//! `omega_n(r) = sqrt(2) n pi / sqrt(R0^3) * sinc(n pi r / R0)`, an
//! orthonormal system in `L^2([0, R0]; r^2 dr)`. Modes are indexed from 1.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{config, domain, HeliosError, Result};
use crate::quadrature::simpson_weights;

/// Uniform radial grid `r_i = i R0 / N`, `i = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    r0: f64,
    points: usize,
}

impl RadialGrid {
    pub fn new(r0: f64, points: usize) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return domain(format!("radius must be positive and finite, got {r0}"));
        }
        if points < 2 {
            return domain(format!("radial grid needs N >= 2, got {points}"));
        }
        Ok(Self { r0, points })
    }

    pub fn radius(&self) -> f64 {
        self.r0
    }

    /// Number of intervals `N`; there are `N + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.r0 / self.points as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.points {
            self.r0
        } else {
            i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.points).map(|i| self.node(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..=self.points).map(|i| f(self.node(i))).collect()
    }

    /// Largest mode count for which Simpson on this grid resolves the basis well.
    pub fn mode_ceiling(&self) -> usize {
        self.points / 3
    }

    /// Simpson weights multiplied by `r_i^2`.
    pub fn weighted_simpson(&self) -> Result<Vec<f64>> {
        let mut w = simpson_weights(self.points, self.step())?;
        for (i, wi) in w.iter_mut().enumerate() {
            let r = self.node(i);
            *wi *= r * r;
        }
        Ok(w)
    }
}

/// `sin(x) / x`, with a Taylor branch around the removable singularity.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

pub fn eigenvalue(n: usize, r0: f64) -> Result<f64> {
    if n == 0 {
        return domain("mode index starts at 1");
    }
    if !(r0 > 0.0) {
        return domain(format!("radius must be positive, got {r0}"));
    }
    let k = n as f64 * PI / r0;
    Ok(k * k)
}

pub fn eigenfunction(n: usize, r0: f64, r: f64) -> Result<f64> {
    if n == 0 {
        return domain("mode index starts at 1");
    }
    if !(r0 > 0.0) {
        return domain(format!("radius must be positive, got {r0}"));
    }
    if !(0.0..=r0).contains(&r) {
        return domain(format!("radius {r} outside [0, {r0}]"));
    }
    Ok(eigenfunction_unchecked(n, r0, r))
}

#[inline]
fn eigenfunction_unchecked(n: usize, r0: f64, r: f64) -> f64 {
    let k = n as f64 * PI / r0;
    std::f64::consts::SQRT_2 * k / r0.sqrt() * sinc(k * r)
}

/// One eigenpair sampled on a radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    pub n: usize,
    pub lambda: f64,
    pub values: Vec<f64>,
}

impl EigenMode {
    pub fn new(n: usize, grid: &RadialGrid) -> Result<Self> {
        let lambda = eigenvalue(n, grid.radius())?;
        let values = grid.sample(|r| eigenfunction_unchecked(n, grid.radius(), r));
        Ok(Self { n, lambda, values })
    }
}

/// Coefficients `f_1..f_{N1}` of a radial profile in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoefficients {
    pub values: Vec<f64>,
    pub basis_r0: f64,
}

impl ModalCoefficients {
    pub fn new(values: Vec<f64>, basis_r0: f64) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HeliosError::Data(format!("modal coefficient {} is not finite", i + 1)));
        }
        Ok(Self { values, basis_r0 })
    }

    pub fn zeros(len: usize, basis_r0: f64) -> Self {
        Self { values: vec![0.0; len], basis_r0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coefficient of mode `n` (1-based).
    pub fn mode(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// Outer product `g_m g_n`.
    pub fn outer(&self) -> Array2<f64> {
        let n = self.len();
        Array2::from_shape_fn((n, n), |(i, j)| self.values[i] * self.values[j])
    }
}

/// The first `N1` modes on a grid together with the `r^2`-weighted Simpson rule.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    grid: RadialGrid,
    modes: Vec<EigenMode>,
    weights: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(grid: RadialGrid, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return config("truncation level must be at least 1");
        }
        let weights = grid.weighted_simpson()?;
        let modes = (1..=truncation).map(|n| EigenMode::new(n, &grid)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, modes, weights })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn truncation(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    pub fn mode(&self, n: usize) -> &EigenMode {
        &self.modes[n - 1]
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(HeliosError::Data(format!(
                "expected {} grid values, got {}",
                self.grid.len(),
                values.len()
            )));
        }
        Ok(())
    }

    /// `(phi, psi)` in `L^2(r^2)` by Simpson.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_len(a)?;
        self.check_len(b)?;
        Ok(self.weights.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum())
    }

    pub fn project(&self, values: &[f64]) -> Result<ModalCoefficients> {
        self.check_len(values)?;
        let coeffs = self
            .modes
            .iter()
            .map(|m| self.weights.iter().zip(values).zip(&m.values).map(|((w, f), o)| w * f * o).sum())
            .collect();
        ModalCoefficients::new(coeffs, self.grid.radius())
    }

    /// `sum_n c_n omega_n(r_i)` over the available modes.
    pub fn synthesize(&self, coeffs: &ModalCoefficients) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (c, m) in coeffs.values.iter().zip(&self.modes) {
            for (o, w) in out.iter_mut().zip(&m.values) {
                *o += c * w;
            }
        }
        out
    }

    /// `sum_{m,n} P_mn omega_m(r_i) omega_n(r_i)` for a symmetric product matrix.
    pub fn synthesize_squared(&self, products: &Array2<f64>) -> Result<Vec<f64>> {
        let k = products.nrows();
        if products.ncols() != k {
            return Err(HeliosError::Data("products matrix must be square".into()));
        }
        if k > self.modes.len() {
            return Err(HeliosError::Data(format!(
                "products matrix covers {k} modes but the basis has {}",
                self.modes.len()
            )));
        }
        for i in 0..k {
            for j in 0..i {
                if (products[(i, j)] - products[(j, i)]).abs() > 1e-8 {
                    return Err(HeliosError::Data(format!(
                        "products matrix not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let out = (0..self.grid.len())
            .map(|r| {
                let mut s = 0.0;
                for i in 0..k {
                    let oi = self.modes[i].values[r];
                    let row: f64 = (0..k).map(|j| products[(i, j)] * self.modes[j].values[r]).sum();
                    s += oi * row;
                }
                s
            })
            .collect();
        Ok(out)
    }

    /// Square of the synthesized series, `(sum_n g_n omega_n)^2`.
    pub fn synthesize_squared_from_coeffs(&self, coeffs: &ModalCoefficients) -> Vec<f64> {
        self.synthesize(coeffs).into_iter().map(|v| v * v).collect()
    }

    pub fn norm(&self, values: &[f64]) -> Result<f64> {
        Ok(self.inner(values, values)?.max(0.0).sqrt())
    }
}

/// `(int_0^R0 r^2 |phi|^2 dr)^(1/2)` by composite Simpson.
pub fn weighted_l2_norm(values: &[f64], grid: &RadialGrid) -> Result<f64> {
    let w = grid.weighted_simpson()?;
    if values.len() != w.len() {
        return Err(HeliosError::Data(format!("expected {} grid values, got {}", w.len(), values.len())));
    }
    Ok(w.iter().zip(values).map(|(w, v)| w * v * v).sum::<f64>().max(0.0).sqrt())
}
