//! Forward solvers for
//!
//! ```text
//! u_t = a(t) (u_rr + (2/r) u_r) + f(r) h(t) + g(r) dB^H/dt,   0 < r < R0, 0 < t <= T
//! u(r, 0) = 0,   u(R0, t) = 0,   u bounded at r = 0
//! ```
//!
//! Two independent routes are provided: a backward-Euler / central-difference
//! finite-difference scheme on the radial grid, and the mild (eigenfunction)
//! solution evaluated mode by mode. The second serves as an oracle for the first.

use ndarray::Array2;

use crate::error::{domain, HeliosError, Result};
use crate::fbm::TimeGrid;
use crate::functions::{FunctionSpec, ScalarFn};
use crate::quadrature::simpson_panel;
use crate::spectral::{ModalCoefficients, RadialGrid, SpectralBasis};
use crate::tridiag::TridiagonalLu;

/// Full statement of the direct problem.
#[derive(Clone)]
pub struct DiffusionProblem {
    pub a: ScalarFn,
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub h: ScalarFn,
    pub r0: f64,
    pub t_final: f64,
    /// Require `h(t_k) >= C(h) > 0` on every node.
    pub assume_h_positive: bool,
}

impl std::fmt::Debug for DiffusionProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionProblem")
            .field("r0", &self.r0)
            .field("t_final", &self.t_final)
            .field("assume_h_positive", &self.assume_h_positive)
            .finish_non_exhaustive()
    }
}

/// Bounds observed for `a` and `h` on the time nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub h_min: f64,
    pub h_sup: f64,
}

impl DiffusionProblem {
    pub fn new(a: ScalarFn, f: ScalarFn, g: ScalarFn, h: ScalarFn, r0: f64, t_final: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return domain(format!("radius must be positive, got {r0}"));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return domain(format!("final time must be positive, got {t_final}"));
        }
        Ok(Self { a, f, g, h, r0, t_final, assume_h_positive: false })
    }

    pub fn from_specs(
        a: &FunctionSpec,
        f: &FunctionSpec,
        g: &FunctionSpec,
        h: &FunctionSpec,
        r0: f64,
        t_final: f64,
    ) -> Result<Self> {
        Self::new(a.to_fn(), f.to_fn(), g.to_fn(), h.to_fn(), r0, t_final)
    }

    pub fn with_positive_h(mut self) -> Self {
        self.assume_h_positive = true;
        self
    }

    /// Checks the coefficient bounds on the nodes of `tgrid`.
    ///
    /// The scheme only evaluates `a` at `t_1..t_M`, so the lower bound `a0 > 0`
    /// is enforced there; `a(t_0)` need only be finite and non-negative. This
    /// admits `a(t) = t^2`.
    pub fn check(&self, tgrid: &TimeGrid) -> Result<ProblemBounds> {
        if (tgrid.t_final() - self.t_final).abs() > 1e-12 * self.t_final {
            return domain(format!(
                "time grid ends at {} but the problem at {}",
                tgrid.t_final(),
                self.t_final
            ));
        }
        let mut b = ProblemBounds { a_min: f64::INFINITY, a_max: 0.0, h_min: f64::INFINITY, h_sup: 0.0 };
        for k in 0..=tgrid.steps() {
            let t = tgrid.node(k);
            let a = (self.a)(t);
            let h = (self.h)(t);
            if !a.is_finite() || !h.is_finite() {
                return Err(HeliosError::Numeric(format!("a or h is not finite at t = {t}")));
            }
            if a < 0.0 {
                return domain(format!("diffusivity a({t}) = {a} is negative"));
            }
            if k > 0 {
                b.a_min = b.a_min.min(a);
            }
            b.a_max = b.a_max.max(a);
            b.h_min = b.h_min.min(h);
            b.h_sup = b.h_sup.max(h.abs());
        }
        if !(b.a_min > 0.0) {
            return domain(format!("diffusivity must be bounded below by a0 > 0, min is {}", b.a_min));
        }
        if self.assume_h_positive && !(b.h_min > 0.0) {
            return domain(format!("h must have a positive lower bound C(h), min is {}", b.h_min));
        }
        Ok(b)
    }
}

/// Table of `A(t) = int_0^t a(s) ds` on the time grid refined by two.
///
/// Each refined interval is integrated by Simpson with its own midpoint, so
/// the table is exact for cubic `a`. Values between refined nodes are
/// interpolated linearly.
#[derive(Debug, Clone)]
pub struct CumulativeDiffusivity {
    grid: TimeGrid,
    fine: Vec<f64>,
}

impl CumulativeDiffusivity {
    pub fn new(a: &dyn Fn(f64) -> f64, grid: &TimeGrid) -> Result<Self> {
        let fine_grid = grid.refined();
        let step = fine_grid.step();
        let mut fine = Vec::with_capacity(fine_grid.steps() + 1);
        fine.push(0.0);
        let mut acc = 0.0;
        let mut left = a(0.0);
        for j in 1..=fine_grid.steps() {
            let t0 = fine_grid.node(j - 1);
            let t1 = fine_grid.node(j);
            let mid = a(0.5 * (t0 + t1));
            let right = a(t1);
            if !(left.is_finite() && mid.is_finite() && right.is_finite()) {
                return Err(HeliosError::Numeric(format!("diffusivity not finite near t = {t0}")));
            }
            acc += simpson_panel(left, mid, right, step);
            fine.push(acc);
            left = right;
        }
        Ok(Self { grid: *grid, fine })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `A(t_k)` at a coarse node.
    pub fn at_node(&self, k: usize) -> f64 {
        self.fine[2 * k]
    }

    /// `A` at the midpoint of coarse step `k` (between `t_{k-1}` and `t_k`), `k >= 1`.
    pub fn at_midpoint(&self, k: usize) -> f64 {
        self.fine[2 * k - 1]
    }

    /// `A` on the refined grid (`2M + 1` values, spacing `h_t / 2`).
    pub fn fine_values(&self) -> &[f64] {
        &self.fine
    }

    /// Table at the coarse nodes.
    pub fn node_values(&self) -> Vec<f64> {
        (0..=self.grid.steps()).map(|k| self.at_node(k)).collect()
    }

    pub fn at(&self, t: f64) -> f64 {
        let fine_step = self.grid.step() / 2.0;
        let last = self.fine.len() - 1;
        if t <= 0.0 {
            return 0.0;
        }
        let x = t / fine_step;
        let j = (x.floor() as usize).min(last);
        if j >= last {
            return self.fine[last];
        }
        let frac = x - j as f64;
        self.fine[j] + frac * (self.fine[j + 1] - self.fine[j])
    }

    /// `int_tau^t a(s) ds`.
    pub fn integral(&self, tau: f64, t: f64) -> f64 {
        self.at(t) - self.at(tau)
    }
}

pub fn accumulate_a(a: &dyn Fn(f64) -> f64, grid: &TimeGrid) -> Result<CumulativeDiffusivity> {
    CumulativeDiffusivity::new(a, grid)
}

/// `u(r_i, t_n)` for every node of the space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub rgrid: RadialGrid,
    pub tgrid: TimeGrid,
    /// `(M + 1) x (N + 1)`, row `n` is time level `t_n`.
    pub values: Array2<f64>,
}

impl FieldHistory {
    pub fn final_values(&self) -> Vec<f64> {
        self.values.row(self.tgrid.steps()).to_vec()
    }
}

/// Modal coefficients `u_n(t_k)` of the mild solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTrajectory {
    pub times: TimeGrid,
    /// `(M + 1) x N1`.
    pub coeffs: Array2<f64>,
}

impl ModalTrajectory {
    pub fn final_modes(&self, r0: f64) -> ModalCoefficients {
        ModalCoefficients { values: self.coeffs.row(self.times.steps()).to_vec(), basis_r0: r0 }
    }
}

fn check_path(path: &[f64], tgrid: &TimeGrid) -> Result<()> {
    if path.len() != tgrid.steps() + 1 {
        return Err(HeliosError::Data(format!(
            "fBm path has {} values, grid has {} nodes",
            path.len(),
            tgrid.steps() + 1
        )));
    }
    Ok(())
}

/// The implicit finite-difference scheme with its per-step factorizations.
///
/// At level `n` the interior unknowns `U = (u_1..u_{N-1})` solve
/// `A U^n = (h^2/h_t) U^{n-1} + h^2 F + (h^2/h_t) B + C` where `A` has
/// diagonal `h^2/h_t + 2 a(t_n)`, super-diagonal `-a(t_n)(h/r_i + 1)` and
/// sub-diagonal `a(t_n)(h/r_i - 1)`. The origin is closed with `u_0 = u_1`
/// (zero radial slope), folded into the first row; since `h/r_1 = 1` that
/// coupling vanishes anyway. `u_N = 0` makes the last entry of `C` vanish.
#[derive(Debug, Clone)]
pub struct FdScheme {
    rgrid: RadialGrid,
    tgrid: TimeGrid,
    steps: Vec<TridiagonalLu>,
    /// `h^2 f(r_i) h(t_n)` per step, interior nodes.
    source: Vec<Vec<f64>>,
    /// `(h^2/h_t) g(r_i)`, interior nodes.
    noise: Vec<f64>,
    mass: f64,
}

impl FdScheme {
    pub fn new(problem: &DiffusionProblem, rgrid: &RadialGrid, tgrid: &TimeGrid) -> Result<Self> {
        problem.check(tgrid)?;
        if (rgrid.radius() - problem.r0).abs() > 1e-12 * problem.r0 {
            return domain("radial grid radius differs from the problem radius");
        }
        let n = rgrid.intervals();
        let interior = n - 1;
        let hr = rgrid.step();
        let ht = tgrid.step();
        let mass = hr * hr / ht;
        let r: Vec<f64> = (1..n).map(|i| rgrid.node(i)).collect();
        let f: Vec<f64> = r.iter().map(|&x| (problem.f)(x)).collect();
        let noise: Vec<f64> = r.iter().map(|&x| mass * (problem.g)(x)).collect();
        let mut steps = Vec::with_capacity(tgrid.steps());
        let mut source = Vec::with_capacity(tgrid.steps());
        let mut lower = vec![0.0; interior];
        let mut diag = vec![0.0; interior];
        let mut upper = vec![0.0; interior];
        for step in 1..=tgrid.steps() {
            let t = tgrid.node(step);
            let a = (problem.a)(t);
            for i in 0..interior {
                let ratio = hr / r[i];
                lower[i] = a * (ratio - 1.0);
                diag[i] = mass + 2.0 * a;
                upper[i] = -a * (ratio + 1.0);
            }
            // u_0 = u_1
            diag[0] += lower[0];
            lower[0] = 0.0;
            let lu = TridiagonalLu::new(&lower, &diag, &upper).map_err(|e| match e {
                HeliosError::Numeric(msg) => HeliosError::Numeric(format!("time step {step}: {msg}")),
                other => other,
            })?;
            steps.push(lu);
            let ht_val = (problem.h)(t);
            source.push(f.iter().map(|fi| hr * hr * fi * ht_val).collect());
        }
        Ok(Self { rgrid: *rgrid, tgrid: *tgrid, steps, source, noise, mass })
    }

    pub fn rgrid(&self) -> &RadialGrid {
        &self.rgrid
    }

    pub fn tgrid(&self) -> &TimeGrid {
        &self.tgrid
    }

    /// Runs the scheme, handing every full time level (including `r_0` and
    /// `r_N`) to `visit`.
    fn run(&self, path: &[f64], mut visit: impl FnMut(usize, &[f64])) -> Result<()> {
        check_path(path, &self.tgrid)?;
        let n = self.rgrid.intervals();
        let mut full = vec![0.0; n + 1];
        visit(0, &full);
        let mut u = vec![0.0; n - 1];
        for step in 1..=self.tgrid.steps() {
            let db = path[step] - path[step - 1];
            if !db.is_finite() {
                return Err(HeliosError::Numeric(format!("fBm increment not finite at step {step}")));
            }
            let src = &self.source[step - 1];
            for i in 0..n - 1 {
                u[i] = self.mass * u[i] + src[i] + self.noise[i] * db;
            }
            self.steps[step - 1].solve(&mut u);
            full[1..n].copy_from_slice(&u);
            full[0] = u[0];
            full[n] = 0.0;
            visit(step, &full);
        }
        Ok(())
    }

    pub fn solve(&self, path: &[f64]) -> Result<FieldHistory> {
        let mut values = Array2::zeros((self.tgrid.steps() + 1, self.rgrid.len()));
        self.run(path, |k, level| {
            values.row_mut(k).assign(&ndarray::ArrayView1::from(level));
        })?;
        Ok(FieldHistory { rgrid: self.rgrid, tgrid: self.tgrid, values })
    }

    /// Only the final level `u(., T)`.
    pub fn solve_final(&self, path: &[f64]) -> Result<Vec<f64>> {
        let last = self.tgrid.steps();
        let mut out = Vec::new();
        self.run(path, |k, level| {
            if k == last {
                out = level.to_vec();
            }
        })?;
        Ok(out)
    }

    /// Calls `visit(k, u(., t_k))` for every level without storing the history.
    pub fn for_each_level(&self, path: &[f64], visit: impl FnMut(usize, &[f64])) -> Result<()> {
        self.run(path, visit)
    }
}

pub fn solve_fd(
    problem: &DiffusionProblem,
    rgrid: &RadialGrid,
    tgrid: &TimeGrid,
    path: &[f64],
) -> Result<FieldHistory> {
    FdScheme::new(problem, rgrid, tgrid)?.solve(path)
}

/// Mode-by-mode evaluation of the mild solution
///
/// `u_n(t) = f_n int_0^t h(tau) e^{-lambda_n (A(t) - A(tau))} dtau
///         + g_n int_0^t e^{-lambda_n (A(t) - A(tau))} dB^H(tau)`.
///
/// The deterministic integral is composite Simpson on the refined time grid,
/// accumulated step by step; the stochastic integral is the left-endpoint
/// sum over the path increments.
#[derive(Debug, Clone)]
pub struct MildSolver {
    tgrid: TimeGrid,
    r0: f64,
    f_coeffs: ModalCoefficients,
    g_coeffs: ModalCoefficients,
    /// `e^{-lambda_n (A(t_k) - A(t_{k-1}))}`, indexed `[mode][k - 1]`.
    decay: Vec<Vec<f64>>,
    /// `int_0^{t_k} h(tau) e^{-lambda_n (A(t_k) - A(tau))} dtau`, indexed `[mode][k]`.
    source_integral: Vec<Vec<f64>>,
    /// `e^{-lambda_n (A(T) - A(t_{k-1}))}`, indexed `[mode][k - 1]`.
    final_weights: Vec<Vec<f64>>,
}

impl MildSolver {
    pub fn new(problem: &DiffusionProblem, basis: &SpectralBasis, tgrid: &TimeGrid) -> Result<Self> {
        problem.check(tgrid)?;
        let grid = basis.grid();
        if (grid.radius() - problem.r0).abs() > 1e-12 * problem.r0 {
            return domain("spectral basis radius differs from the problem radius");
        }
        let f_coeffs = basis.project(&grid.sample(|r| (problem.f)(r)))?;
        let g_coeffs = basis.project(&grid.sample(|r| (problem.g)(r)))?;
        Self::from_coefficients(problem, &basis.lambdas(), f_coeffs, g_coeffs, tgrid)
    }

    /// Builds the solver from modal coefficients directly (no radial grid).
    pub fn from_coefficients(
        problem: &DiffusionProblem,
        lambdas: &[f64],
        f_coeffs: ModalCoefficients,
        g_coeffs: ModalCoefficients,
        tgrid: &TimeGrid,
    ) -> Result<Self> {
        problem.check(tgrid)?;
        if f_coeffs.len() != lambdas.len() || g_coeffs.len() != lambdas.len() {
            return Err(HeliosError::Data("coefficient vectors must match the mode count".into()));
        }
        let cum = CumulativeDiffusivity::new(&*problem.a, tgrid)?;
        let m = tgrid.steps();
        let ht = tgrid.step();
        let h_nodes: Vec<f64> = (0..=m).map(|k| (problem.h)(tgrid.node(k))).collect();
        let h_mid: Vec<f64> =
            (1..=m).map(|k| (problem.h)(0.5 * (tgrid.node(k - 1) + tgrid.node(k)))).collect();
        let a_final = cum.at_node(m);
        let mut decay = Vec::with_capacity(lambdas.len());
        let mut source_integral = Vec::with_capacity(lambdas.len());
        let mut final_weights = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let mut d = Vec::with_capacity(m);
            let mut s = Vec::with_capacity(m + 1);
            s.push(0.0);
            for k in 1..=m {
                let ak = cum.at_node(k);
                let step_decay = (-lambda * (ak - cum.at_node(k - 1))).exp();
                let mid_decay = (-lambda * (ak - cum.at_midpoint(k))).exp();
                let panel = simpson_panel(h_nodes[k - 1] * step_decay, h_mid[k - 1] * mid_decay, h_nodes[k], ht);
                s.push(step_decay * s[k - 1] + panel);
                d.push(step_decay);
            }
            let w = (1..=m).map(|k| (-lambda * (a_final - cum.at_node(k - 1))).exp()).collect();
            decay.push(d);
            source_integral.push(s);
            final_weights.push(w);
        }
        Ok(Self { tgrid: *tgrid, r0: problem.r0, f_coeffs, g_coeffs, decay, source_integral, final_weights })
    }

    pub fn truncation(&self) -> usize {
        self.decay.len()
    }

    pub fn f_coeffs(&self) -> &ModalCoefficients {
        &self.f_coeffs
    }

    pub fn g_coeffs(&self) -> &ModalCoefficients {
        &self.g_coeffs
    }

    /// `int_0^T h(tau) e^{-lambda_n (A(T) - A(tau))} dtau` for mode `n` (1-based).
    pub fn source_kernel(&self, n: usize) -> f64 {
        self.source_integral[n - 1][self.tgrid.steps()]
    }

    pub fn trajectory(&self, path: &[f64]) -> Result<ModalTrajectory> {
        check_path(path, &self.tgrid)?;
        let m = self.tgrid.steps();
        let modes = self.truncation();
        let mut coeffs = Array2::zeros((m + 1, modes));
        for n in 0..modes {
            let fnc = self.f_coeffs.values[n];
            let gnc = self.g_coeffs.values[n];
            let mut stoch = 0.0;
            for k in 1..=m {
                stoch = self.decay[n][k - 1] * (stoch + (path[k] - path[k - 1]));
                coeffs[(k, n)] = fnc * self.source_integral[n][k] + gnc * stoch;
            }
        }
        Ok(ModalTrajectory { times: self.tgrid, coeffs })
    }

    /// `u_n(T)` only.
    pub fn final_modes(&self, path: &[f64]) -> Result<ModalCoefficients> {
        check_path(path, &self.tgrid)?;
        let m = self.tgrid.steps();
        let values = (0..self.truncation())
            .map(|n| {
                let stoch: f64 =
                    self.final_weights[n].iter().zip(path.windows(2)).map(|(w, p)| w * (p[1] - p[0])).sum();
                self.f_coeffs.values[n] * self.source_integral[n][m] + self.g_coeffs.values[n] * stoch
            })
            .collect();
        Ok(ModalCoefficients { values, basis_r0: self.r0 })
    }
}

pub fn solve_mild(
    problem: &DiffusionProblem,
    basis: &SpectralBasis,
    tgrid: &TimeGrid,
    path: &[f64],
) -> Result<ModalTrajectory> {
    MildSolver::new(problem, basis, tgrid)?.trajectory(path)
}

/// Projection of `u(., T)` onto the first `N1` modes.
pub fn final_time_modes(field: &FieldHistory, basis: &SpectralBasis) -> Result<ModalCoefficients> {
    if field.rgrid != *basis.grid() {
        return domain("field and basis live on different radial grids");
    }
    basis.project(&field.final_values())
}
