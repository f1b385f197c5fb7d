//! Ensemble reproducibility, coupled-trajectory linearity and
//! invariant-measure estimation against the exact stationary sampler.

use approx::assert_abs_diff_eq;

use kinfp::basis::{Basis, SpectralState, TruncationSpec};
use kinfp::diagnostics::DiagnosticsParams;
use kinfp::ensemble::{self, EnsembleConfig, TestFunctional};
use kinfp::noise::{BrownianPath, NoiseSpec};
use kinfp::operators::OperatorBundle;
use kinfp::particle;
use kinfp::solver::{self, Scheme, SolverConfig};

fn config(size: usize, seed: u64, solver: SolverConfig, mass: f64) -> EnsembleConfig {
    EnsembleConfig {
        size,
        base_seed: seed,
        solver,
        mass,
    }
}

#[test]
fn deterministic_ensembles_have_zero_spread() {
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.0);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::random_mass(&basis, 3, 0.5);
    let solver_cfg =
        SolverConfig::new(Scheme::ExponentialEulerIto, 1e-3, 0.2, 0.0).with_diag_every(50);
    let result = ensemble::run_ensemble(
        &bundle,
        &g,
        &config(4, 99, solver_cfg, 0.5),
        &DiagnosticsParams::default(),
    )
    .unwrap();
    let stats = result.scalar_stats(|r| r.norm_sq);
    assert!(stats.stderr.iter().all(|&s| s == 0.0));
}

#[test]
fn statistics_are_reproducible_from_the_base_seed() {
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.3);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::ground(&basis, 1.0);
    let solver_cfg =
        SolverConfig::new(Scheme::ExponentialEulerIto, 1e-3, 0.3, 0.3).with_diag_every(30);
    let run = || {
        ensemble::run_ensemble(
            &bundle,
            &g,
            &config(6, 1234, solver_cfg.clone(), 1.0),
            &DiagnosticsParams::default(),
        )
        .unwrap()
        .scalar_stats(|r| r.norm_sq)
    };
    let a = run();
    let b = run();
    for (x, y) in a.mean.iter().zip(&b.mean) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn coupled_difference_solves_the_difference_system() {
    // difference of runs == run of the difference, coefficient-wise.
    let basis = Basis::new(TruncationSpec::new(1, 1, 5)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.2);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g1 = SpectralState::random_mass(&basis, 5, 0.8);
    let g2 = SpectralState::random_mass(&basis, 6, 0.8);
    let diff0 = g1.sub(&g2);
    assert!(diff0.mass().abs() < 1e-14);
    let dt = 1e-3;
    let steps = 400;
    let path = BrownianPath::sample(1, 77, dt, steps);
    let cfg = SolverConfig::new(Scheme::HeunStratonovich, dt, dt * steps as f64, 0.2);
    let mut s1 = g1.clone();
    let mut s2 = g2.clone();
    let mut sd = diff0.clone();
    let mut st1 = solver::Stepper::new(&bundle, &cfg).unwrap();
    let mut st2 = solver::Stepper::new(&bundle, &cfg).unwrap();
    let mut std_ = solver::Stepper::new(&bundle, &cfg).unwrap();
    for step in 0..steps {
        st1.step(&mut s1, &path, step);
        st2.step(&mut s2, &path, step);
        std_.step(&mut sd, &path, step);
    }
    for ((a, b), d) in s1.coeffs().iter().zip(s2.coeffs()).zip(sd.coeffs()) {
        assert!((a - b - d).norm() < 1e-12);
    }
    assert!(sd.mass().abs() < 1e-13);
}

#[test]
fn identical_initial_states_stay_identical() {
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.4);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::random_mass(&basis, 8, 0.4);
    let dt = 1e-3;
    let path = BrownianPath::sample(1, 5, dt, 300);
    let cfg = SolverConfig::new(Scheme::EulerMaruyamaIto, dt, 0.3, 0.4);
    let mut a = g.clone();
    let mut b = g.clone();
    let mut st1 = solver::Stepper::new(&bundle, &cfg).unwrap();
    let mut st2 = solver::Stepper::new(&bundle, &cfg).unwrap();
    for step in 0..300 {
        st1.step(&mut a, &path, step);
        st2.step(&mut b, &path, step);
    }
    for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
        assert_eq!(x, y);
    }
}

#[test]
fn mixing_experiment_rejects_mass_mismatch() {
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.1);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g1 = SpectralState::ground(&basis, 1.0);
    let g2 = SpectralState::ground(&basis, 0.5);
    let cfg = config(
        4,
        1,
        SolverConfig::new(Scheme::ExponentialEulerIto, 1e-3, 0.5, 0.1),
        1.0,
    );
    assert!(ensemble::mixing_experiment(&bundle, &g1, &g2, &cfg, (0.1, 0.5)).is_err());
}

#[test]
fn mixing_difference_contracts() {
    let basis = Basis::new(TruncationSpec::new(1, 2, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.05);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g1 = SpectralState::ground(&basis, 1.0)
        .add(&SpectralState::single_mode(&basis, &[1], &[0], 0.5).unwrap());
    let g2 = SpectralState::ground(&basis, 1.0);
    let solver_cfg =
        SolverConfig::new(Scheme::ExponentialEulerIto, 1e-3, 4.0, 0.05).with_diag_every(100);
    let result = ensemble::mixing_experiment(
        &bundle,
        &g1,
        &g2,
        &config(4, 31, solver_cfg, 1.0),
        (1.0, 4.0),
    )
    .unwrap();
    assert!(result.fit.rate > 0.0, "rate {}", result.fit.rate);
    assert!(
        result.mean_diff_sq.last().unwrap() < &result.mean_diff_sq[0],
        "no contraction"
    );
}

#[test]
fn invariant_estimate_with_zero_mass_is_dirac_at_zero() {
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.3);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::zero(&basis);
    let solver_cfg =
        SolverConfig::new(Scheme::ExponentialEulerIto, 1e-3, 3.0, 0.3).with_diag_every(100);
    let est = ensemble::estimate_invariant(
        &bundle,
        &g,
        &config(3, 7, solver_cfg, 0.0),
        &TestFunctional::default_family(1, 100.0),
        1.0,
    )
    .unwrap();
    for (name, mean) in est.names.iter().zip(&est.mean) {
        assert!(mean.abs() < 1e-14, "{name} = {mean}");
    }
}

#[test]
fn deterministic_invariant_estimate_concentrates_on_the_steady_state() {
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.0);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let mass = 0.7;
    let g = SpectralState::ground(&basis, mass);
    let solver_cfg =
        SolverConfig::new(Scheme::ExponentialEulerIto, 1e-3, 3.0, 0.0).with_diag_every(100);
    let est = ensemble::estimate_invariant(
        &bundle,
        &g,
        &config(2, 3, solver_cfg, mass),
        &[TestFunctional::ClippedNorm { r: 10.0 }],
        1.0,
    )
    .unwrap();
    assert_abs_diff_eq!(est.mean[0], mass, epsilon = 1e-12);
    assert!(est.stderr[0] < 1e-14);
}

#[test]
fn invariant_estimate_matches_the_exact_stationary_sampler() {
    // Time-ensemble averages of a clipped norm against the same
    // functional on exact stationary draws.
    let basis = Basis::new(TruncationSpec::new(1, 0, 12)).unwrap();
    let lambda = 0.3;
    let noise = NoiseSpec::canonical_constant(1, lambda);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::ground(&basis, 1.0);
    let clip = 5.0;
    let solver_cfg =
        SolverConfig::new(Scheme::ExponentialEulerIto, 2e-3, 21.0, lambda).with_diag_every(25);
    let est = ensemble::estimate_invariant(
        &bundle,
        &g,
        &config(16, 2024, solver_cfg, 1.0),
        &[TestFunctional::ClippedNorm { r: clip }],
        1.0,
    )
    .unwrap();
    // Exact sampler: norm of the stationary profile is exp(|shift|²/2).
    let draws = 200_000;
    let mut acc = 0.0;
    for seed in 0..draws {
        let v = particle::ou_stationary_sample(seed, 1).v[0];
        let shift_sq = (lambda / std::f64::consts::SQRT_2 * v).powi(2);
        acc += (0.5 * shift_sq).exp().min(clip);
    }
    let exact = acc / draws as f64;
    let tol = 3.0 * est.stderr[0] + 0.01;
    assert!(
        (est.mean[0] - exact).abs() < tol,
        "estimate {} vs sampler {exact} (tol {tol})",
        est.mean[0]
    );
}
