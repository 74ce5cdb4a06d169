//! Recovery of `f` and `g^2` from final-time statistics.
//!
//! With `phi_n(tau) = exp(-lambda_n int_tau^T a)`:
//!
//! * `E u_n(T) = f_n I_n`, `I_n = int_0^T h(tau) phi_n(tau) dtau`;
//! * `Cov(u_m(T), u_n(T)) = g_m g_n E_mn`, `E_mn = E[int phi_m dB^H int phi_n dB^H]`.
//!
//! Dividing the data by these kernels and truncating the series at `N1`
//! gives the reconstruction. `E_mn` is evaluated per regime of the Hurst
//! index: Simpson for `H = 1/2`, a product rule with exact singular cell
//! weights for `H > 1/2`, and Monte-Carlo for `H < 1/2`.

use ndarray::Array2;
use rayon::prelude::*;

use crate::ensemble::EnsembleStats;
use crate::error::{domain, HeliosError, Result};
use crate::fbm::{increment_autocovariance, FbmSampler, HurstIndex, TimeGrid};
use crate::forward::{CumulativeDiffusivity, DiffusionProblem};
use crate::quadrature::simpson_weights;
use crate::rng::{self, Domain};
use crate::spectral::{eigenvalue, weighted_l2_norm, ModalCoefficients, RadialGrid, SpectralBasis};

/// Denominators smaller than this are skipped rather than divided by.
pub const DIVISION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    Quadrature,
    MonteCarlo,
}

impl KernelMethod {
    pub fn for_hurst(hurst: HurstIndex) -> Self {
        if hurst.value() < 0.5 {
            KernelMethod::MonteCarlo
        } else {
            KernelMethod::Quadrature
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelMethod::Quadrature => "quadrature",
            KernelMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// Settings for the Monte-Carlo regime of the noise kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub mc_paths: usize,
    pub mc_seed: u64,
    /// Relative standard error above which an entry is flagged.
    pub mc_tolerance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { mc_paths: 100_000, mc_seed: 0, mc_tolerance: 0.05 }
    }
}

/// Kernel weights for a tabulated set of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    /// Mode indices the rows and columns refer to.
    pub modes: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// `I_n`.
    pub source: Vec<f64>,
    /// `E_mn`.
    pub noise: Array2<f64>,
    /// Monte-Carlo standard error of each `E_mn` (zero for quadrature).
    pub noise_std_error: Array2<f64>,
    pub hurst: HurstIndex,
    pub source_method: KernelMethod,
    pub noise_method: KernelMethod,
    /// Entries whose Monte-Carlo standard error exceeded the tolerance.
    pub warnings: Vec<String>,
}

impl KernelTable {
    /// Kernels for modes `1..=truncation`.
    pub fn build(
        problem: &DiffusionProblem,
        tgrid: &TimeGrid,
        hurst: HurstIndex,
        truncation: usize,
        config: &KernelConfig,
    ) -> Result<Self> {
        Self::for_modes(problem, tgrid, hurst, &(1..=truncation).collect::<Vec<_>>(), config)
    }

    pub fn for_modes(
        problem: &DiffusionProblem,
        tgrid: &TimeGrid,
        hurst: HurstIndex,
        modes: &[usize],
        config: &KernelConfig,
    ) -> Result<Self> {
        if modes.is_empty() {
            return domain("kernel table needs at least one mode");
        }
        problem.check(tgrid)?;
        let lambdas = modes.iter().map(|&n| eigenvalue(n, problem.r0)).collect::<Result<Vec<_>>>()?;
        let cum = CumulativeDiffusivity::new(&*problem.a, tgrid)?;
        let h_fine = fine_samples(tgrid, |t| (problem.h)(t));
        let source = lambdas
            .iter()
            .zip(modes)
            .map(|(&lambda, &n)| {
                let v = source_integral(lambda, &h_fine, &cum)?;
                if !(v > 0.0) {
                    return Err(HeliosError::Numeric(format!("source kernel I_{n} = {v} is not positive")));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        let (noise, noise_std_error, noise_method) = noise_matrix(&lambdas, hurst, &cum, config)?;
        let mut warnings = Vec::new();
        if noise_method == KernelMethod::MonteCarlo {
            for i in 0..modes.len() {
                for j in 0..=i {
                    let e = noise[(i, j)];
                    let se = noise_std_error[(i, j)];
                    if se > config.mc_tolerance * e.abs() {
                        warnings.push(format!(
                            "E_{},{} = {e:e} has Monte-Carlo standard error {se:e}",
                            modes[i], modes[j]
                        ));
                    }
                }
            }
        }
        Ok(Self {
            modes: modes.to_vec(),
            lambdas,
            source,
            noise,
            noise_std_error,
            hurst,
            source_method: KernelMethod::Quadrature,
            noise_method,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

fn fine_samples(tgrid: &TimeGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let fine = tgrid.refined();
    (0..=fine.steps()).map(|j| f(fine.node(j))).collect()
}

/// Simpson on the refined grid of `h(tau) exp(-lambda (A(T) - A(tau)))`.
fn source_integral(lambda: f64, h_fine: &[f64], cum: &CumulativeDiffusivity) -> Result<f64> {
    let a = cum.fine_values();
    let last = a[a.len() - 1];
    let w = simpson_weights(a.len() - 1, cum.grid().step() / 2.0)?;
    Ok(w.iter().zip(h_fine).zip(a).map(|((w, h), ai)| w * h * (-lambda * (last - ai)).exp()).sum())
}

/// `I_n = int_0^T h(tau) exp(-lambda_n int_tau^T a) dtau` for mode `n`.
pub fn source_kernel(n: usize, problem: &DiffusionProblem, tgrid: &TimeGrid) -> Result<f64> {
    let lambda = eigenvalue(n, problem.r0)?;
    problem.check(tgrid)?;
    let cum = CumulativeDiffusivity::new(&*problem.a, tgrid)?;
    let v = source_integral(lambda, &fine_samples(tgrid, |t| (problem.h)(t)), &cum)?;
    if !(v > 0.0) {
        return Err(HeliosError::Numeric(format!("source kernel I_{n} = {v} is not positive")));
    }
    Ok(v)
}

/// Value and standard error of one noise-kernel entry `E_mn`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEntry {
    pub value: f64,
    pub std_error: f64,
    pub method: KernelMethod,
}

/// A single entry `E_mn`; symmetric in `(m, n)` by construction.
pub fn noise_kernel(
    m: usize,
    n: usize,
    hurst: HurstIndex,
    problem: &DiffusionProblem,
    tgrid: &TimeGrid,
    config: &KernelConfig,
) -> Result<KernelEntry> {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let table = KernelTable::for_modes(problem, tgrid, hurst, &[lo, hi], config)?;
    let (i, j) = if lo == hi { (0, 0) } else { (1, 0) };
    Ok(KernelEntry { value: table.noise[(i, j)], std_error: table.noise_std_error[(i, j)], method: table.noise_method })
}

type NoiseParts = (Array2<f64>, Array2<f64>, KernelMethod);

fn noise_matrix(
    lambdas: &[f64],
    hurst: HurstIndex,
    cum: &CumulativeDiffusivity,
    config: &KernelConfig,
) -> Result<NoiseParts> {
    let k = lambdas.len();
    let zeros = Array2::zeros((k, k));
    if hurst.is_brownian() {
        Ok((brownian_noise(lambdas, cum)?, zeros, KernelMethod::Quadrature))
    } else if hurst.value() > 0.5 {
        Ok((persistent_noise(lambdas, hurst, cum), zeros, KernelMethod::Quadrature))
    } else {
        let (value, se) = monte_carlo_noise(lambdas, hurst, cum, config)?;
        Ok((value, se, KernelMethod::MonteCarlo))
    }
}

/// `H = 1/2`: Ito isometry, `E_mn = int_0^T exp(-(lambda_m + lambda_n)(A(T) - A(tau))) dtau`.
fn brownian_noise(lambdas: &[f64], cum: &CumulativeDiffusivity) -> Result<Array2<f64>> {
    let a = cum.fine_values();
    let last = a[a.len() - 1];
    let w = simpson_weights(a.len() - 1, cum.grid().step() / 2.0)?;
    let k = lambdas.len();
    let mut out = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..=i {
            let rate = lambdas[i] + lambdas[j];
            let v: f64 = w.iter().zip(a).map(|(w, ai)| w * (-rate * (last - ai)).exp()).sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// `phi_n` at the midpoints of the coarse time steps.
fn midpoint_weights(lambda: f64, cum: &CumulativeDiffusivity) -> Vec<f64> {
    let steps = cum.grid().steps();
    let last = cum.at_node(steps);
    (1..=steps).map(|k| (-lambda * (last - cum.at_midpoint(k))).exp()).collect()
}

/// `H > 1/2`: `alpha_H int int phi_m(r) phi_n(u) |r - u|^{2H-2} du dr` with the
/// kernel integrated exactly over each pair of cells and the smooth factor
/// taken at the cell midpoints. The exact cell integral of
/// `alpha_H |r - u|^{2H-2}` over cells `k` apart is
/// `h_t^{2H} (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`.
fn persistent_noise(lambdas: &[f64], hurst: HurstIndex, cum: &CumulativeDiffusivity) -> Array2<f64> {
    let steps = cum.grid().steps();
    let ht = cum.grid().step();
    let lag: Vec<f64> = (0..steps).map(|k| increment_autocovariance(k, ht, hurst)).collect();
    let phis: Vec<Vec<f64>> = lambdas.iter().map(|&l| midpoint_weights(l, cum)).collect();
    let applied: Vec<Vec<f64>> = phis
        .par_iter()
        .map(|phi| {
            (0..steps)
                .map(|i| {
                    let mut s = 0.0;
                    for (j, p) in phi.iter().enumerate() {
                        s += lag[i.abs_diff(j)] * p;
                    }
                    s
                })
                .collect()
        })
        .collect();
    let k = lambdas.len();
    let mut out = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..=i {
            let v: f64 = phis[j].iter().zip(&applied[i]).map(|(a, b)| a * b).sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

const MC_CHUNK: usize = 1024;

/// `H < 1/2`: mean of `X_m X_n` over simulated paths, where
/// `X_n = sum_k phi_n(midpoint_k) (B(t_k) - B(t_{k-1}))`.
///
/// With the path written `B = L z` through the Cholesky factor `L`, each
/// `X_n` is the linear functional `c_n . z`, `c_n = L^T D^T phi_n`, so a path
/// costs one normal vector plus `N1` dot products. Sample chunks are reduced
/// in index order for thread-count-independent results.
fn monte_carlo_noise(
    lambdas: &[f64],
    hurst: HurstIndex,
    cum: &CumulativeDiffusivity,
    config: &KernelConfig,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if config.mc_paths < 2 {
        return domain("Monte-Carlo kernel needs at least 2 paths");
    }
    let sampler = FbmSampler::new(*cum.grid(), hurst)?;
    let steps = cum.grid().steps();
    let functionals: Vec<Vec<f64>> = lambdas
        .iter()
        .map(|&l| {
            let phi = midpoint_weights(l, cum);
            // sum_k phi_k (B_k - B_{k-1}) = sum_k B_k (phi_k - phi_{k+1}), phi_{M+1} = 0
            let diff: Vec<f64> =
                (0..steps).map(|k| phi[k] - if k + 1 < steps { phi[k + 1] } else { 0.0 }).collect();
            sampler.apply_transpose(&diff)
        })
        .collect();
    let k = lambdas.len();
    let chunks = config.mc_paths.div_ceil(MC_CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * MC_CHUNK;
            let end = (start + MC_CHUNK).min(config.mc_paths);
            let mut sum = vec![0.0; k * k];
            let mut sum_sq = vec![0.0; k * k];
            let mut z = vec![0.0; steps];
            let mut x = vec![0.0; k];
            for sample in start..end {
                rng::fill_standard_normal(&mut rng::stream(config.mc_seed, Domain::Kernel, sample as u64), &mut z);
                for (xi, c) in x.iter_mut().zip(&functionals) {
                    *xi = c.iter().zip(&z).map(|(a, b)| a * b).sum();
                }
                for i in 0..k {
                    for j in 0..=i {
                        let prod = x[i] * x[j];
                        sum[i * k + j] += prod;
                        sum_sq[i * k + j] += prod * prod;
                    }
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; k * k];
    let mut sum_sq = vec![0.0; k * k];
    for (s, q) in partial {
        for idx in 0..k * k {
            sum[idx] += s[idx];
            sum_sq[idx] += q[idx];
        }
    }
    let n = config.mc_paths as f64;
    let mut value = Array2::zeros((k, k));
    let mut se = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..=i {
            let mean = sum[i * k + j] / n;
            let var = ((sum_sq[i * k + j] - n * mean * mean) / (n - 1.0)).max(0.0);
            let e = (var / n).sqrt();
            value[(i, j)] = mean;
            value[(j, i)] = mean;
            se[(i, j)] = e;
            se[(j, i)] = e;
        }
    }
    Ok((value, se))
}

/// Relative errors of a reconstruction against known profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionErrors {
    pub f: f64,
    pub g_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub f_coeffs: ModalCoefficients,
    /// Symmetrized `g_m g_n`.
    pub g_products: Array2<f64>,
    pub f_values: Vec<f64>,
    pub g_squared_values: Vec<f64>,
    pub truncation: usize,
    /// `(m, n)` pairs (1-based) whose kernel fell below [`DIVISION_FLOOR`].
    pub skipped: Vec<(usize, usize)>,
    pub errors: Option<ReconstructionErrors>,
}

/// `f_n = E u_n(T) / I_n`, `g_m g_n = Cov(u_m, u_n) / E_mn`, truncated at
/// `N1 = basis.truncation()` and synthesized on the basis grid.
pub fn reconstruct(stats: &EnsembleStats, kernels: &KernelTable, basis: &SpectralBasis) -> Result<Reconstruction> {
    let n1 = basis.truncation();
    if stats.truncation() < n1 || kernels.len() < n1 {
        return domain(format!(
            "need data and kernels for {n1} modes, have {} and {}",
            stats.truncation(),
            kernels.len()
        ));
    }
    if kernels.modes[..n1].iter().enumerate().any(|(i, &m)| m != i + 1) {
        return domain("kernel table must start at mode 1 and be contiguous");
    }
    let mut skipped = Vec::new();
    let mut f = Vec::with_capacity(n1);
    for i in 0..n1 {
        let den = kernels.source[i];
        if !den.is_finite() || den <= 0.0 {
            return Err(HeliosError::Numeric(format!("source kernel I_{} = {den} is not positive", i + 1)));
        }
        f.push(stats.mean[i] / den);
    }
    let mut raw = Array2::zeros((n1, n1));
    for i in 0..n1 {
        for j in 0..n1 {
            let den = kernels.noise[(i, j)];
            if !den.is_finite() {
                return Err(HeliosError::Numeric(format!("noise kernel E_{},{} is not finite", i + 1, j + 1)));
            }
            if den.abs() < DIVISION_FLOOR {
                if i <= j {
                    skipped.push((i + 1, j + 1));
                }
                continue;
            }
            raw[(i, j)] = stats.cov[(i, j)] / den;
        }
    }
    let products = Array2::from_shape_fn((n1, n1), |(i, j)| 0.5 * (raw[(i, j)] + raw[(j, i)]));
    let f_coeffs = ModalCoefficients::new(f, basis.grid().radius())?;
    let f_values = basis.synthesize(&f_coeffs);
    let g_squared_values = basis.synthesize_squared(&products)?;
    Ok(Reconstruction {
        f_coeffs,
        g_products: products,
        f_values,
        g_squared_values,
        truncation: n1,
        skipped,
        errors: None,
    })
}

impl Reconstruction {
    /// Fills in the relative errors against the true `f` and `g^2` on the grid.
    pub fn with_truth(mut self, f_true: &[f64], g_squared_true: &[f64], grid: &RadialGrid) -> Result<Self> {
        self.errors = Some(ReconstructionErrors {
            f: relative_error(&self.f_values, f_true, grid)?,
            g_squared: relative_error(&self.g_squared_values, g_squared_true, grid)?,
        });
        Ok(self)
    }
}

/// `||recon - truth|| / ||truth||` in `L^2(r^2)`; the absolute norm when the truth vanishes.
pub fn relative_error(recon: &[f64], truth: &[f64], grid: &RadialGrid) -> Result<f64> {
    if recon.len() != truth.len() {
        return Err(HeliosError::Data("reconstruction and truth differ in length".into()));
    }
    let diff: Vec<f64> = recon.iter().zip(truth).map(|(a, b)| a - b).collect();
    let num = weighted_l2_norm(&diff, grid)?;
    let den = weighted_l2_norm(truth, grid)?;
    Ok(if den == 0.0 { num } else { num / den })
}

/// One row of a decay probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub n: usize,
    pub lambda: f64,
    pub source: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProbe {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log I_n` against `log lambda_n`.
    pub source_slope: f64,
    /// Least-squares slope of `log E_nn` against `log lambda_n`.
    pub noise_slope: f64,
    pub warnings: Vec<String>,
}

/// Tabulates `I_n` and `E_nn` over `n_min..=n_max` and fits their decay rates.
pub fn decay_probe(
    n_min: usize,
    n_max: usize,
    hurst: HurstIndex,
    problem: &DiffusionProblem,
    tgrid: &TimeGrid,
    config: &KernelConfig,
) -> Result<DecayProbe> {
    if n_min == 0 || n_max <= n_min {
        return domain(format!("decay probe needs 1 <= n_min < n_max, got {n_min}..{n_max}"));
    }
    let modes: Vec<usize> = (n_min..=n_max).collect();
    let table = KernelTable::for_modes(problem, tgrid, hurst, &modes, config)?;
    let rows: Vec<DecayRow> = (0..modes.len())
        .map(|i| DecayRow { n: modes[i], lambda: table.lambdas[i], source: table.source[i], noise: table.noise[(i, i)] })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.lambda.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.source.abs().ln()).collect();
    let yn: Vec<f64> = rows.iter().map(|r| r.noise.abs().ln()).collect();
    Ok(DecayProbe {
        source_slope: least_squares_slope(&x, &ys),
        noise_slope: least_squares_slope(&x, &yn),
        rows,
        warnings: table.warnings,
    })
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
