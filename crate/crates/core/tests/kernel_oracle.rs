//! Source and noise kernels against closed forms and brute-force oracles.

use std::f64::consts::PI;
use std::sync::Arc;

use helios::fbm::{HurstIndex, TimeGrid};
use helios::forward::DiffusionProblem;
use helios::inverse::{noise_kernel, source_kernel, KernelConfig, KernelMethod, KernelTable};
use helios::ScalarFn;

fn c(v: f64) -> ScalarFn {
    Arc::new(move |_| v)
}

fn constant_a(a0: f64) -> DiffusionProblem {
    DiffusionProblem::new(c(a0), c(1.0), c(1.0), c(1.0), PI, 1.0).unwrap()
}

fn hurst(h: f64) -> HurstIndex {
    HurstIndex::new(h).unwrap()
}

#[test]
fn source_kernel_closed_form() {
    let tg = TimeGrid::new(1.0, 2048).unwrap();
    for a0 in [0.5, 1.0] {
        let p = constant_a(a0);
        for n in 1..=20 {
            let lam = (n * n) as f64;
            let want = (1.0 - (-lam * a0).exp()) / (lam * a0);
            let got = source_kernel(n, &p, &tg).unwrap();
            assert!((got - want).abs() < 1e-8, "a0 = {a0}, n = {n}: {got} vs {want}");
        }
    }
}

/// `int_0^1 exp(-(1 - tau^3) / 3) dtau` by Richardson-extrapolated Simpson
/// with the analytic antiderivative of `a(t) = t^2`.
fn quadratic_a_oracle() -> f64 {
    let simpson = |n: usize| {
        let h = 1.0 / n as f64;
        let f = |t: f64| (-(1.0 - t * t * t) / 3.0).exp();
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    };
    let (coarse, fine) = (simpson(100_000), simpson(200_000));
    fine + (fine - coarse) / 15.0
}

#[test]
fn source_kernel_quadratic_diffusivity() {
    let p = DiffusionProblem::new(Arc::new(|t| t * t), c(1.0), c(1.0), c(1.0), PI, 1.0).unwrap();
    let tg = TimeGrid::new(1.0, 2048).unwrap();
    let got = source_kernel(1, &p, &tg).unwrap();
    let want = quadratic_a_oracle();
    assert!((got - want).abs() < 1e-8, "{got} vs {want}");
}

#[test]
fn brownian_noise_kernel_closed_form() {
    let tg = TimeGrid::new(1.0, 2048).unwrap();
    let a0 = 0.7;
    let p = constant_a(a0);
    let cfg = KernelConfig::default();
    for n in [1, 4, 15] {
        let lam = (n * n) as f64;
        let want = (1.0 - (-2.0 * lam * a0).exp()) / (2.0 * lam * a0);
        let e = noise_kernel(n, n, hurst(0.5), &p, &tg, &cfg).unwrap();
        assert_eq!(e.method, KernelMethod::Quadrature);
        assert!((e.value - want).abs() < 1e-8, "n = {n}: {} vs {want}", e.value);
    }
}

/// `alpha_H int int phi(r) phi(u) |r - u|^{2H-2}` for `phi(t) = exp(-(T - t))`
/// on `[0, 1]^2` by the midpoint rule on `cells x cells`.
///
/// By symmetry the integral is twice the part with `u < r`. With `v = r - u`
/// and `u = (T - v) x` it becomes
/// `2 alpha_H int_0^T v^{2H-2} (T - v) int_0^1 phi(x (T - v)) phi(x (T - v) + v) dx dv`,
/// and `v = s^2` turns the weak singularity into the bounded factor `2 s^{4H-3}`.
fn persistent_oracle(h: f64, cells: usize) -> f64 {
    let t = 1.0f64;
    let phi = |tau: f64| (-(t - tau)).exp();
    let alpha = h * (2.0 * h - 1.0);
    let s_max = t.sqrt();
    let (ds, dx) = (s_max / cells as f64, 1.0 / cells as f64);
    let mut acc = 0.0;
    for i in 0..cells {
        let s = (i as f64 + 0.5) * ds;
        let v = s * s;
        let span = t - v;
        let outer = 2.0 * s.powf(4.0 * h - 3.0) * span;
        let mut inner = 0.0;
        for j in 0..cells {
            let u = (j as f64 + 0.5) * dx * span;
            inner += phi(u) * phi(u + v);
        }
        acc += outer * inner * dx;
    }
    2.0 * alpha * acc * ds
}

#[test]
fn persistent_noise_kernel_matches_brute_force() {
    let p = constant_a(1.0);
    let tg = TimeGrid::new(1.0, 2048).unwrap();
    let e = noise_kernel(1, 1, hurst(0.75), &p, &tg, &KernelConfig::default()).unwrap();
    let want = persistent_oracle(0.75, 1000);
    assert!((e.value - want).abs() < 1e-4, "{} vs {want}", e.value);
}

#[test]
fn antipersistent_kernel_consistent_across_seeds() {
    let p = constant_a(1.0);
    let tg = TimeGrid::new(1.0, 256).unwrap();
    let run = |seed| {
        let cfg = KernelConfig { mc_paths: 100_000, mc_seed: seed, ..KernelConfig::default() };
        noise_kernel(1, 1, hurst(0.25), &p, &tg, &cfg).unwrap()
    };
    let (a, b) = (run(1), run(2));
    assert_eq!(a.method, KernelMethod::MonteCarlo);
    assert!(a.std_error > 0.0 && b.std_error > 0.0);
    let tol = 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.value - b.value).abs() < tol, "{} vs {} (tol {tol})", a.value, b.value);
    assert!(a.std_error < 0.05 * a.value);
}

#[test]
fn kernel_tables_are_symmetric_with_positive_diagonal() {
    let p = DiffusionProblem::new(Arc::new(|t| t * t), c(1.0), c(1.0), c(1.0), PI, 1.0).unwrap();
    let tg = TimeGrid::new(1.0, 256).unwrap();
    let cfg = KernelConfig { mc_paths: 4000, ..KernelConfig::default() };
    for h in [0.3, 0.5, 0.8] {
        let table = KernelTable::build(&p, &tg, hurst(h), 6, &cfg).unwrap();
        for i in 0..6 {
            assert!(table.noise[(i, i)] > 0.0);
            assert!(table.source[i] > 0.0);
            for j in 0..6 {
                assert_eq!(table.noise[(i, j)], table.noise[(j, i)], "H = {h}");
            }
        }
    }
}
