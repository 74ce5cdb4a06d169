//! Monte-Carlo statistics of the final-time data.
//!
//! Per-path solves run on the rayon pool; every path draws from its own
//! random stream and results are reduced in path order, so the statistics
//! depend only on the seed, never on the worker count.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{domain, HeliosError, Result};
use crate::fbm::{FbmSampler, HurstIndex, TimeGrid};
use crate::forward::{DiffusionProblem, FdScheme, MildSolver};
use crate::rng::{self, Domain};
use crate::spectral::{weighted_l2_norm, RadialGrid, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    FiniteDifference,
    Mild,
}

impl std::str::FromStr for SolverKind {
    type Err = HeliosError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fd" => Ok(SolverKind::FiniteDifference),
            "mild" => Ok(SolverKind::Mild),
            other => Err(HeliosError::Config(format!("unknown solver '{other}' (expected fd or mild)"))),
        }
    }
}

/// Multiplicative data noise `u (1 + epsilon xi)`, `xi ~ U(-1, 1)` i.i.d. per node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return domain(format!("noise level must be finite and non-negative, got {epsilon}"));
        }
        Ok(Self { epsilon, seed })
    }

    pub fn none() -> Self {
        Self { epsilon: 0.0, seed: 0 }
    }
}

/// Perturbed data together with `delta = ||u_delta - u||` (weighted L2).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyData {
    pub values: Vec<f64>,
    pub delta: f64,
}

/// Applies the noise model to one final-time field; `stream` selects the
/// independent random stream (the path index in an ensemble).
pub fn add_noise(values: &[f64], grid: &RadialGrid, spec: &NoiseSpec, stream: u64) -> Result<NoisyData> {
    if spec.epsilon == 0.0 {
        return Ok(NoisyData { values: values.to_vec(), delta: 0.0 });
    }
    let mut rng = rng::stream(spec.seed, Domain::Noise, stream);
    let noisy: Vec<f64> = values.iter().map(|&u| u + spec.epsilon * u * rng::symmetric_uniform(&mut rng)).collect();
    let diff: Vec<f64> = noisy.iter().zip(values).map(|(a, b)| a - b).collect();
    let delta = weighted_l2_norm(&diff, grid)?;
    Ok(NoisyData { values: noisy, delta })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub truncation: usize,
    pub solver: SolverKind,
    pub hurst: HurstIndex,
    pub noise: NoiseSpec,
    pub seed: u64,
}

/// Sample mean and unbiased sample covariance of `u_n(T)`, `n = 1..N1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    pub cov: Array2<f64>,
    pub path_count: usize,
    pub seed: u64,
    /// Mean data-noise magnitude `delta` over the paths (0 without noise).
    pub mean_delta: f64,
}

impl EnsembleStats {
    /// Builds the statistics from per-path samples (rows = paths).
    pub fn from_samples(samples: &[Vec<f64>], seed: u64) -> Result<Self> {
        let p = samples.len();
        if p < 2 {
            return domain(format!("need at least 2 paths for a covariance, got {p}"));
        }
        let k = samples[0].len();
        let mut mean = vec![0.0; k];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= p as f64;
        }
        let mut cov = Array2::zeros((k, k));
        let mut centered = vec![0.0; k];
        for s in samples {
            for ((c, v), m) in centered.iter_mut().zip(s).zip(&mean) {
                *c = v - m;
            }
            for i in 0..k {
                for j in 0..=i {
                    cov[(i, j)] += centered[i] * centered[j];
                }
            }
        }
        let scale = 1.0 / (p as f64 - 1.0);
        for i in 0..k {
            for j in 0..=i {
                let v = cov[(i, j)] * scale;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(Self { mean, cov, path_count: p, seed, mean_delta: 0.0 })
    }

    pub fn truncation(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        (0..self.truncation()).map(|i| self.cov[(i, i)]).collect()
    }
}

/// Forward solver shared by all paths of an ensemble.
enum PathSolver {
    Fd(Box<FdScheme>),
    Mild(Box<MildSolver>),
}

/// Runs `paths` forward solves and returns the statistics of `u_n(T)`.
pub fn run_ensemble(
    problem: &DiffusionProblem,
    rgrid: &RadialGrid,
    tgrid: &TimeGrid,
    config: &EnsembleConfig,
) -> Result<EnsembleStats> {
    let sampler = FbmSampler::new(*tgrid, config.hurst)?;
    run_ensemble_with(problem, rgrid, &sampler, config)
}

/// As [`run_ensemble`], reusing an existing fBm factorization.
pub fn run_ensemble_with(
    problem: &DiffusionProblem,
    rgrid: &RadialGrid,
    sampler: &FbmSampler,
    config: &EnsembleConfig,
) -> Result<EnsembleStats> {
    if config.paths < 2 {
        return domain(format!("ensemble needs P >= 2, got {}", config.paths));
    }
    if sampler.hurst() != config.hurst {
        return domain("sampler Hurst index differs from the ensemble configuration");
    }
    let tgrid = sampler.grid();
    let basis = SpectralBasis::new(*rgrid, config.truncation)?;
    let solver = match config.solver {
        SolverKind::FiniteDifference => PathSolver::Fd(Box::new(FdScheme::new(problem, rgrid, tgrid)?)),
        SolverKind::Mild => PathSolver::Mild(Box::new(MildSolver::new(problem, &basis, tgrid)?)),
    };
    let results: Vec<Result<(Vec<f64>, f64)>> = (0..config.paths)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample_path(config.seed, i as u64);
            let annotate = |e: HeliosError| match e {
                HeliosError::Numeric(m) => HeliosError::Numeric(format!("path {i}: {m}")),
                HeliosError::Data(m) => HeliosError::Data(format!("path {i}: {m}")),
                other => other,
            };
            let (modes, delta) = match &solver {
                PathSolver::Fd(fd) => {
                    let u = fd.solve_final(&path).map_err(annotate)?;
                    let noisy = add_noise(&u, rgrid, &config.noise, i as u64)?;
                    (basis.project(&noisy.values).map_err(annotate)?.values, noisy.delta)
                }
                PathSolver::Mild(mild) => {
                    let c = mild.final_modes(&path).map_err(annotate)?;
                    if config.noise.epsilon == 0.0 {
                        (c.values, 0.0)
                    } else {
                        let u = basis.synthesize(&c);
                        let noisy = add_noise(&u, rgrid, &config.noise, i as u64)?;
                        (basis.project(&noisy.values).map_err(annotate)?.values, noisy.delta)
                    }
                }
            };
            Ok((modes, delta))
        })
        .collect();
    let mut samples = Vec::with_capacity(config.paths);
    let mut delta_sum = 0.0;
    for r in results {
        let (s, d) = r?;
        samples.push(s);
        delta_sum += d;
    }
    let mut stats = EnsembleStats::from_samples(&samples, config.seed)?;
    stats.mean_delta = delta_sum / config.paths as f64;
    Ok(stats)
}

/// Monte-Carlo check of the a-priori energy bound of the direct problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// Monte-Carlo estimate of `E ||u||^2` over `D x [0, T]`.
    pub energy: f64,
    /// `T^3 ||f||^2 ||h||_inf^2 + T^{2H+1} / (2H+1) ||g||^2`.
    pub bound: f64,
    pub ratio: f64,
}

/// `E ||u||^2_{L2(D x [0,T])}` divided by the right-hand side of the energy
/// estimate. Spatial norms are `r^2`-weighted Simpson per level, combined by
/// the trapezoid rule in time; the expectation is the mean over `paths` FD solves.
pub fn stability_ratio(
    problem: &DiffusionProblem,
    rgrid: &RadialGrid,
    tgrid: &TimeGrid,
    paths: usize,
    hurst: HurstIndex,
    seed: u64,
) -> Result<StabilityReport> {
    if paths == 0 {
        return domain("need at least one path");
    }
    let mut problem = problem.clone();
    problem.assume_h_positive = true;
    let bounds = problem.check(tgrid)?;
    let f_norm = weighted_l2_norm(&rgrid.sample(|r| (problem.f)(r)), rgrid)?;
    let g_norm = weighted_l2_norm(&rgrid.sample(|r| (problem.g)(r)), rgrid)?;
    let t = tgrid.t_final();
    let two_h1 = 2.0 * hurst.value() + 1.0;
    let bound = t.powi(3) * f_norm * f_norm * bounds.h_sup * bounds.h_sup + t.powf(two_h1) / two_h1 * g_norm * g_norm;
    if !(bound > 0.0) {
        return domain("stability bound is zero: f and g both vanish");
    }
    let sampler = FbmSampler::new(*tgrid, hurst)?;
    let scheme = FdScheme::new(&problem, rgrid, tgrid)?;
    let weights = rgrid.weighted_simpson()?;
    let ht = tgrid.step();
    let last = tgrid.steps();
    let energies: Vec<Result<f64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample_path(seed, i as u64);
            let mut acc = 0.0;
            scheme.for_each_level(&path, |k, level| {
                let sq: f64 = weights.iter().zip(level).map(|(w, u)| w * u * u).sum();
                let wt = if k == 0 || k == last { 0.5 } else { 1.0 };
                acc += wt * ht * sq;
            })?;
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for e in energies {
        total += e?;
    }
    let energy = total / paths as f64;
    Ok(StabilityReport { energy, bound, ratio: energy / bound })
}
