//! Ensemble statistics and reconstruction properties.

use std::f64::consts::PI;
use std::sync::Arc;

use helios::ensemble::{add_noise, run_ensemble, stability_ratio, EnsembleConfig, NoiseSpec, SolverKind};
use helios::fbm::{FbmSampler, HurstIndex, TimeGrid};
use helios::forward::{DiffusionProblem, MildSolver};
use helios::inverse::{reconstruct, KernelConfig, KernelTable};
use helios::spectral::{eigenfunction, weighted_l2_norm, RadialGrid, SpectralBasis};
use helios::ScalarFn;

fn c(v: f64) -> ScalarFn {
    Arc::new(move |_| v)
}

fn sin(k: f64) -> ScalarFn {
    Arc::new(move |r: f64| (k * r).sin())
}

fn omega1() -> ScalarFn {
    Arc::new(|r| eigenfunction(1, PI, r).unwrap())
}

fn quadratic() -> ScalarFn {
    Arc::new(|t| t * t)
}

fn config(paths: usize, truncation: usize, solver: SolverKind, h: f64, epsilon: f64, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        paths,
        truncation,
        solver,
        hurst: HurstIndex::new(h).unwrap(),
        noise: NoiseSpec::new(epsilon, seed).unwrap(),
        seed,
    }
}

#[test]
fn deterministic_data_has_zero_covariance() {
    let p = DiffusionProblem::new(quadratic(), sin(3.0), c(0.0), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 40).unwrap();
    let tg = TimeGrid::new(1.0, 128).unwrap();
    for solver in [SolverKind::FiniteDifference, SolverKind::Mild] {
        let stats = run_ensemble(&p, &rg, &tg, &config(20, 8, solver, 0.3, 0.0, 1)).unwrap();
        assert!(stats.cov.iter().all(|v| v.abs() <= 1e-20), "{solver:?}");
        if solver == SolverKind::Mild {
            let basis = SpectralBasis::new(rg, 8).unwrap();
            let single = MildSolver::new(&p, &basis, &tg).unwrap().final_modes(&vec![0.0; 129]).unwrap();
            for (m, s) in stats.mean.iter().zip(&single.values) {
                assert!((m - s).abs() <= 1e-14 * s.abs().max(1e-300));
            }
        }
    }
}

#[test]
fn ensemble_variance_matches_ito_isometry() {
    let a0 = 1.0;
    let p = DiffusionProblem::new(c(a0), c(0.0), omega1(), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 100).unwrap();
    let tg = TimeGrid::new(1.0, 256).unwrap();
    let paths = 10_000;
    for solver in [SolverKind::Mild, SolverKind::FiniteDifference] {
        let stats = run_ensemble(&p, &rg, &tg, &config(paths, 1, solver, 0.5, 0.0, 3)).unwrap();
        let want = (1.0 - (-2.0 * a0).exp()) / (2.0 * a0);
        let se = want * (2.0 / (paths as f64 - 1.0)).sqrt();
        // the FD route carries an O(h_t) bias of its own on top of the sampling error
        let slack = if solver == SolverKind::Mild { 0.0 } else { 0.01 * want };
        assert!((stats.cov[(0, 0)] - want).abs() < 3.0 * se + slack, "{solver:?}: {} vs {want}", stats.cov[(0, 0)]);
    }
}

#[test]
fn sign_of_g_is_invisible() {
    let rg = RadialGrid::new(PI, 40).unwrap();
    let tg = TimeGrid::new(1.0, 64).unwrap();
    let plus = DiffusionProblem::new(quadratic(), sin(3.0), sin(2.0), c(1.0), PI, 1.0).unwrap();
    let minus =
        DiffusionProblem::new(quadratic(), sin(3.0), Arc::new(|r: f64| -(2.0 * r).sin()), c(1.0), PI, 1.0).unwrap();
    let cfg = config(200, 6, SolverKind::FiniteDifference, 0.7, 0.0, 5);
    let a = run_ensemble(&plus, &rg, &tg, &cfg).unwrap();
    let b = run_ensemble(&minus, &rg, &tg, &cfg).unwrap();
    for (x, y) in a.cov.iter().zip(b.cov.iter()) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    }
    // with a shared seed the means differ by twice the sample mean of the
    // zero-mean stochastic term, so they agree within its standard error
    for (i, (x, y)) in a.mean.iter().zip(&b.mean).enumerate() {
        let se = (a.cov[(i, i)] / 200.0).sqrt();
        assert!((x - y).abs() <= 2.0 * 3.0 * se, "mode {}: {x} vs {y}", i + 1);
    }
    let kernels = KernelTable::build(&plus, &tg, HurstIndex::new(0.7).unwrap(), 6, &KernelConfig::default()).unwrap();
    let basis = SpectralBasis::new(rg, 6).unwrap();
    let ra = reconstruct(&a, &kernels, &basis).unwrap();
    let rb = reconstruct(&b, &kernels, &basis).unwrap();
    for (x, y) in ra.g_products.iter().zip(rb.g_products.iter()) {
        assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
    }
}

#[test]
fn measurement_noise_scales_quadratically() {
    let p = DiffusionProblem::new(quadratic(), sin(3.0), c(0.0), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 40).unwrap();
    let tg = TimeGrid::new(1.0, 64).unwrap();
    let small = run_ensemble(&p, &rg, &tg, &config(300, 6, SolverKind::FiniteDifference, 0.5, 0.001, 9)).unwrap();
    let large = run_ensemble(&p, &rg, &tg, &config(300, 6, SolverKind::FiniteDifference, 0.5, 0.002, 9)).unwrap();
    for i in 0..6 {
        let ratio = large.cov[(i, i)] / small.cov[(i, i)];
        assert!((ratio - 4.0).abs() < 1e-6, "mode {}: {ratio}", i + 1);
    }
    assert!(small.mean_delta > 0.0 && (large.mean_delta / small.mean_delta - 2.0).abs() < 1e-9);
}

#[test]
fn noise_magnitude_is_bounded_by_epsilon() {
    let rg = RadialGrid::new(PI, 100).unwrap();
    let u = rg.sample(|r| (3.0 * r).sin() * (1.0 + r));
    let norm = weighted_l2_norm(&u, &rg).unwrap();
    for stream in 0..50 {
        let d = add_noise(&u, &rg, &NoiseSpec::new(0.001, 4).unwrap(), stream).unwrap();
        assert!(d.delta <= 0.001 * norm);
        assert!(d.delta > 0.0);
    }
}

#[test]
fn statistics_do_not_depend_on_worker_count() {
    let p = DiffusionProblem::new(quadratic(), sin(3.0), sin(2.0), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 30).unwrap();
    let tg = TimeGrid::new(1.0, 64).unwrap();
    let cfg = config(64, 5, SolverKind::FiniteDifference, 0.35, 0.01, 17);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&p, &rg, &tg, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn covariance_is_positive_semidefinite() {
    let p = DiffusionProblem::new(quadratic(), sin(3.0), sin(2.0), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 40).unwrap();
    let tg = TimeGrid::new(1.0, 64).unwrap();
    let stats = run_ensemble(&p, &rg, &tg, &config(100, 10, SolverKind::Mild, 0.6, 0.0, 2)).unwrap();
    let m = nalgebra::DMatrix::from_fn(10, 10, |i, j| stats.cov[(i, j)]);
    let min = m.symmetric_eigenvalues().min();
    assert!(min >= -1e-10, "{min}");
    for i in 0..10 {
        for j in 0..10 {
            assert_eq!(stats.cov[(i, j)], stats.cov[(j, i)]);
        }
    }
}

#[test]
fn stability_ratio_closed_form_for_first_mode() {
    let a0 = 1.0;
    let p = DiffusionProblem::new(c(a0), omega1(), c(0.0), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 100).unwrap();
    let tg = TimeGrid::new(1.0, 1024).unwrap();
    let report = stability_ratio(&p, &rg, &tg, 2, HurstIndex::new(0.5).unwrap(), 0).unwrap();
    // u = u_1(t) omega_1 with u_1(t) = (1 - e^{-t}) and ||omega_1|| = 1:
    // int_0^1 (1 - e^{-t})^2 dt = 1 - 2(1 - e^{-1}) + (1 - e^{-2}) / 2
    let e1 = (-1.0f64).exp();
    let energy = 1.0 - 2.0 * (1.0 - e1) + (1.0 - e1 * e1) / 2.0;
    assert!((report.energy - energy).abs() < 0.01 * energy, "{} vs {energy}", report.energy);
    assert!(report.ratio <= 1.0 && report.ratio > 0.0);
}

#[test]
fn noise_free_mild_data_recover_source_coefficients() {
    let p = DiffusionProblem::new(quadratic(), sin(3.0), c(0.0), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 100).unwrap();
    let tg = TimeGrid::new(1.0, 512).unwrap();
    let basis = SpectralBasis::new(rg, 30).unwrap();
    let stats = run_ensemble(&p, &rg, &tg, &config(2, 30, SolverKind::Mild, 0.5, 0.0, 0)).unwrap();
    let kernels = KernelTable::build(&p, &tg, HurstIndex::new(0.5).unwrap(), 30, &KernelConfig::default()).unwrap();
    let rec = reconstruct(&stats, &kernels, &basis).unwrap();
    let truth = basis.project(&rg.sample(|r| (3.0 * r).sin())).unwrap();
    for n in 1..=30 {
        assert!((rec.f_coeffs.mode(n) - truth.mode(n)).abs() < 1e-4, "n = {n}");
    }
    assert!(rec.g_products.iter().all(|v| *v == 0.0));
}

#[test]
fn reconstruction_scales_with_the_data() {
    let p = DiffusionProblem::new(quadratic(), sin(3.0), sin(2.0), c(1.0), PI, 1.0).unwrap();
    let rg = RadialGrid::new(PI, 40).unwrap();
    let tg = TimeGrid::new(1.0, 64).unwrap();
    let basis = SpectralBasis::new(rg, 6).unwrap();
    let stats = run_ensemble(&p, &rg, &tg, &config(50, 6, SolverKind::FiniteDifference, 0.8, 0.0, 1)).unwrap();
    let kernels = KernelTable::build(&p, &tg, HurstIndex::new(0.8).unwrap(), 6, &KernelConfig::default()).unwrap();
    let base = reconstruct(&stats, &kernels, &basis).unwrap();
    let mut scaled = stats.clone();
    let k = 3.0;
    scaled.mean.iter_mut().for_each(|m| *m *= k);
    scaled.cov.mapv_inplace(|v| v * k * k);
    let rec = reconstruct(&scaled, &kernels, &basis).unwrap();
    for (a, b) in base.f_coeffs.values.iter().zip(&rec.f_coeffs.values) {
        assert!((k * a - b).abs() <= 1e-14 * b.abs());
    }
    for (a, b) in base.g_products.iter().zip(rec.g_products.iter()) {
        assert!((k * k * a - b).abs() <= 1e-14 * b.abs());
    }
}

#[test]
fn sampler_reuse_matches_fresh_factorization() {
    let tg = TimeGrid::new(1.0, 32).unwrap();
    let s1 = FbmSampler::new(tg, HurstIndex::new(0.4).unwrap()).unwrap();
    let s2 = FbmSampler::new(tg, HurstIndex::new(0.4).unwrap()).unwrap();
    assert_eq!(s1.sample_path(8, 3), s2.sample_path(8, 3));
}
