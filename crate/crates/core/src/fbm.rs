//! Fractional Brownian motion: covariance structure and exact path synthesis.
//!
//! Paths are drawn by a dense Cholesky factor of the covariance matrix over
//! the nodes `t_1..t_M` of a uniform grid (`B(t_0) = 0` is pinned), so every
//! sample is exact in distribution for any Hurst index. The factor is built
//! once per `(grid, H)` and shared across paths.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{domain, HeliosError, Result};
use crate::rng::{self, Domain};

/// Hurst index, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            domain(format!("Hurst index must lie in (0, 1), got {value}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `2H`, the exponent of the variance law.
    pub fn exponent(self) -> f64 {
        2.0 * self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

/// Uniform grid `t_k = k * t_final / steps`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return domain(format!("final time must be positive and finite, got {t_final}"));
        }
        if steps == 0 {
            return domain("time grid needs at least one step");
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// The same interval with twice as many steps.
    pub fn refined(&self) -> Self {
        Self { t_final: self.t_final, steps: 2 * self.steps }
    }
}

/// `R(t, s) = (t^2H + s^2H - |t - s|^2H) / 2`.
pub fn covariance(t: f64, s: f64, hurst: HurstIndex) -> Result<f64> {
    if t < 0.0 || s < 0.0 || t.is_nan() || s.is_nan() {
        return domain(format!("fBm covariance needs non-negative times, got ({t}, {s})"));
    }
    Ok(raw_covariance(t, s, hurst.exponent()))
}

#[inline]
fn raw_covariance(t: f64, s: f64, p: f64) -> f64 {
    0.5 * (t.powf(p) + s.powf(p) - (t - s).abs().powf(p))
}

/// `E[(B(t) - B(s)) (B(s) - B(r))]` for `0 <= r < s < t`.
pub fn increment_covariance(t: f64, s: f64, r: f64, hurst: HurstIndex) -> Result<f64> {
    if !(0.0 <= r && r < s && s < t) {
        return domain(format!("increment covariance needs 0 <= r < s < t, got r={r}, s={s}, t={t}"));
    }
    let p = hurst.exponent();
    Ok(0.5 * ((t - r).powf(p) - (t - s).powf(p) - (s - r).powf(p)))
}

/// Covariance of two unit-spaced increments `k` steps apart, times `step^2H`.
pub fn increment_autocovariance(lag: usize, step: f64, hurst: HurstIndex) -> f64 {
    let p = hurst.exponent();
    let k = lag as f64;
    let unit = if lag == 0 {
        1.0
    } else {
        0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).powf(p))
    };
    unit * step.powf(p)
}

/// Row-major Gram matrix `[R(t_i, t_j)]` for `i, j = 1..=M`.
pub fn gram_matrix(grid: &TimeGrid, hurst: HurstIndex) -> Array2<f64> {
    let m = grid.steps();
    let p = hurst.exponent();
    Array2::from_shape_fn((m, m), |(i, j)| raw_covariance(grid.node(i + 1), grid.node(j + 1), p))
}

/// Packed lower-triangular Cholesky factor of the fBm Gram matrix.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: HurstIndex,
    /// Row `i` occupies `factor[i(i+1)/2 .. i(i+1)/2 + i + 1]`.
    factor: Vec<f64>,
    jitter: f64,
}

const JITTER_RETRIES: usize = 3;

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: HurstIndex) -> Result<Self> {
        let gram = gram_matrix(&grid, hurst);
        let max_diag = (0..grid.steps()).map(|i| gram[(i, i)]).fold(0.0_f64, f64::max);
        let mut jitter = 0.0;
        for attempt in 0..=JITTER_RETRIES {
            if let Some(factor) = cholesky_packed(&gram, jitter) {
                return Ok(Self { grid, hurst, factor, jitter });
            }
            if attempt < JITTER_RETRIES {
                jitter = if jitter == 0.0 { 1e-12 * max_diag } else { jitter * 10.0 };
            }
        }
        let smallest = smallest_eigenvalue(&gram);
        Err(HeliosError::Numeric(format!(
            "fBm covariance not positive definite after jitter {jitter:e} (H = {}, M = {}); smallest eigenvalue {smallest:e}",
            hurst.value(),
            grid.steps()
        )))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    /// Diagonal shift that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Multiplies the factor by a standard-normal vector `z` (length `M`),
    /// writing `B(t_1..t_M)` into `out[1..]` and `0` into `out[0]`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let m = self.grid.steps();
        debug_assert_eq!(z.len(), m);
        debug_assert_eq!(out.len(), m + 1);
        out[0] = 0.0;
        for i in 0..m {
            let row = &self.factor[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            out[i + 1] = row.iter().zip(&z[..=i]).map(|(l, z)| l * z).sum();
        }
    }

    /// `L^T v` for a vector indexed by `t_1..t_M`; used to express linear
    /// functionals of a path directly in terms of the underlying normals.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let m = self.grid.steps();
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &self.factor[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            let vi = v[i];
            for (o, l) in out[..=i].iter_mut().zip(row) {
                *o += l * vi;
            }
        }
        out
    }

    /// Path number `index` of the ensemble seeded by `seed`. Each path has its
    /// own random stream, so it does not depend on how many others are drawn.
    pub fn sample_path(&self, seed: u64, index: u64) -> Vec<f64> {
        let m = self.grid.steps();
        let mut z = vec![0.0; m];
        rng::fill_standard_normal(&mut rng::stream(seed, Domain::Paths, index), &mut z);
        let mut out = vec![0.0; m + 1];
        self.apply(&z, &mut out);
        out
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<PathEnsemble> {
        if count == 0 {
            return domain("path count must be at least 1");
        }
        let m = self.grid.steps();
        let rows: Vec<Vec<f64>> =
            (0..count as u64).into_par_iter().map(|i| self.sample_path(seed, i)).collect();
        let mut paths = Array2::zeros((count, m + 1));
        for (mut dst, src) in paths.rows_mut().into_iter().zip(rows) {
            dst.assign(&ndarray::ArrayView1::from(&src));
        }
        Ok(PathEnsemble { grid: self.grid, hurst: self.hurst, paths, seed })
    }
}

fn cholesky_packed(gram: &Array2<f64>, jitter: f64) -> Option<Vec<f64>> {
    let m = gram.nrows();
    let mut l = vec![0.0; m * (m + 1) / 2];
    for i in 0..m {
        let ri = i * (i + 1) / 2;
        for j in 0..=i {
            let rj = j * (j + 1) / 2;
            let dot: f64 = l[ri..ri + j].iter().zip(&l[rj..rj + j]).map(|(a, b)| a * b).sum();
            if i == j {
                let pivot = gram[(i, i)] + jitter - dot;
                if !(pivot > 0.0) || !pivot.is_finite() {
                    return None;
                }
                l[ri + i] = pivot.sqrt();
            } else {
                l[ri + j] = (gram[(i, j)] - dot) / l[rj + j];
            }
        }
    }
    Some(l)
}

fn smallest_eigenvalue(gram: &Array2<f64>) -> f64 {
    let m = gram.nrows();
    let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| gram[(i, j)]);
    dense.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Convenience wrapper: factor and sample in one call.
pub fn sample_paths(grid: TimeGrid, hurst: HurstIndex, count: usize, seed: u64) -> Result<PathEnsemble> {
    FbmSampler::new(grid, hurst)?.sample(count, seed)
}

/// A set of fBm sample paths on a common grid; rows are paths, column `k` is `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    hurst: HurstIndex,
    paths: Array2<f64>,
    seed: u64,
}

impl PathEnsemble {
    /// Wraps externally produced paths, checking the pinned origin.
    pub fn from_paths(grid: TimeGrid, hurst: HurstIndex, paths: Array2<f64>, seed: u64) -> Result<Self> {
        if paths.ncols() != grid.steps() + 1 {
            return domain(format!(
                "paths have {} columns but the grid has {} nodes",
                paths.ncols(),
                grid.steps() + 1
            ));
        }
        if paths.column(0).iter().any(|&v| v != 0.0) {
            return domain("every path must start at 0");
        }
        Ok(Self { grid, hurst, paths, seed })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths(&self) -> &Array2<f64> {
        &self.paths
    }

    pub fn path_count(&self) -> usize {
        self.paths.nrows()
    }

    pub fn path(&self, index: usize) -> ndarray::ArrayView1<'_, f64> {
        self.paths.row(index)
    }
}

/// `B(t_k) - B(t_{k-1})` for `k = 1..=M`, one row per path.
pub fn increments(ensemble: &PathEnsemble) -> Array2<f64> {
    let paths = ensemble.paths();
    let m = paths.ncols() - 1;
    Array2::from_shape_fn((paths.nrows(), m), |(p, k)| paths[(p, k + 1)] - paths[(p, k)])
}

/// Increments of a single path.
pub fn path_increments(path: &[f64]) -> Vec<f64> {
    path.windows(2).map(|w| w[1] - w[0]).collect()
}
