//! Langevin oracle behavior and its coupling to the spectral solver
//! through shared Brownian increments.

use approx::assert_abs_diff_eq;

use kinfp::basis::{Basis, SpectralState, TruncationSpec};
use kinfp::noise::{BrownianPath, FieldSpec, NoiseSpec};
use kinfp::operators::OperatorBundle;
use kinfp::particle::{
    self, LangevinConfig, LangevinScheme, OuScheme, ParticleEnsemble,
};
use kinfp::solver::{self, Scheme, SolverConfig};

#[test]
fn friction_decay_is_exact_without_noise() {
    let mut ens = ParticleEnsemble::maxwellian(64, 1, 7);
    let v0 = ens.velocities.clone();
    let fields = [FieldSpec::constant(vec![1.0])];
    let dt = 0.05;
    let steps = 40;
    let path = BrownianPath::sample(1, 3, dt, steps);
    let config = LangevinConfig {
        lambda: 0.0,
        dt,
        scheme: LangevinScheme::ExponentialEuler,
        thermal_noise: false,
        hat_seed: 0,
    };
    particle::simulate_langevin(&mut ens, &fields, &path, &config, steps, steps).unwrap();
    let decay = (-(dt * steps as f64)).exp();
    for (v, v_init) in ens.velocities.iter().zip(&v0) {
        assert_abs_diff_eq!(*v, v_init * decay, epsilon = 1e-12);
    }
}

#[test]
fn mean_velocity_follows_the_shared_path_recursion() {
    // Thermal noise off: the ensemble mean obeys exactly
    // u <- u(1 - dt) + λ ΔW.
    let mut ens = ParticleEnsemble::maxwellian(512, 1, 11);
    let fields = [FieldSpec::constant(vec![1.0])];
    let lambda = 0.3;
    let dt = 1e-2;
    let steps = 200;
    let path = BrownianPath::sample(1, 13, dt, steps);
    let config = LangevinConfig {
        lambda,
        dt,
        scheme: LangevinScheme::EulerMaruyama,
        thermal_noise: false,
        hat_seed: 0,
    };
    let mut expected = ens.mean_velocity()[0];
    let traj =
        particle::simulate_langevin(&mut ens, &fields, &path, &config, steps, 1).unwrap();
    for step in 0..steps {
        expected = expected * (1.0 - dt) + lambda * path.increment(0, step);
        assert_abs_diff_eq!(traj.mean_velocity[step + 1][0], expected, epsilon = 1e-10);
    }
}

#[test]
fn pde_and_particle_first_moments_agree_pathwise() {
    // Shared increments, Euler-Maruyama on both sides: the two mean
    // velocities solve the same scalar recursion up to the thermal
    // average O(P^{-1/2}).
    let n_particles = 20_000;
    let lambda = 0.3;
    let dt = 1e-3;
    let steps = 1000;
    let basis = Basis::new(TruncationSpec::new(1, 1, 6)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, lambda);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let path = BrownianPath::sample(1, 17, dt, steps);

    let g = SpectralState::ground(&basis, 1.0);
    let config = SolverConfig::new(Scheme::EulerMaruyamaIto, dt, dt * steps as f64, lambda);
    let mut stepper = solver::Stepper::new(&bundle, &config).unwrap();
    let mut state = g.clone();
    let mut pde_u = vec![state.coeff(&[0], &[1]).re];
    for step in 0..steps {
        stepper.step(&mut state, &path, step);
        pde_u.push(state.coeff(&[0], &[1]).re);
    }

    let mut ens = ParticleEnsemble::maxwellian(n_particles, 1, 23);
    let lconfig = LangevinConfig {
        lambda,
        dt,
        scheme: LangevinScheme::EulerMaruyama,
        thermal_noise: true,
        hat_seed: 29,
    };
    let traj = particle::simulate_langevin(
        &mut ens,
        &noise.fields,
        &path,
        &lconfig,
        steps,
        1,
    )
    .unwrap();

    let budget = 4.0 * (dt + (n_particles as f64).powf(-0.5));
    for (u_pde, u_part) in pde_u.iter().zip(traj.mean_velocity.iter().map(|v| v[0])) {
        assert!(
            (u_pde - u_part).abs() <= budget,
            "pathwise gap {} exceeds {budget}",
            (u_pde - u_part).abs()
        );
    }
}

#[test]
fn thermalized_velocities_approach_the_unit_gaussian() {
    let n_particles = 40_000;
    let mut ens = ParticleEnsemble::maxwellian(n_particles, 1, 31);
    // Start far from equilibrium: shift every velocity.
    for v in ens.velocities.iter_mut() {
        *v += 2.0;
    }
    let fields = [FieldSpec::constant(vec![1.0])];
    let dt = 0.02;
    let steps = 300;
    let path = BrownianPath::sample(1, 37, dt, steps);
    let config = LangevinConfig {
        lambda: 0.0,
        dt,
        scheme: LangevinScheme::EulerMaruyama,
        thermal_noise: true,
        hat_seed: 41,
    };
    particle::simulate_langevin(&mut ens, &fields, &path, &config, steps, steps).unwrap();
    let mean = ens.mean_velocity()[0];
    let m2 = ens.velocity_second_moment()[0];
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((m2 - 1.0).abs() < 0.03, "second moment {m2}");
}

#[test]
fn ou_evolution_modes() {
    let v0 = particle::ou_stationary_sample(5, 2);
    let path = BrownianPath::sample(2, 7, 0.01, 100);
    let a = particle::ou_evolve(&v0, &path, 0, 100, 0.01, OuScheme::ExactDecay).unwrap();
    let b = particle::ou_evolve(&v0, &path, 0, 100, 0.01, OuScheme::ExactDecay).unwrap();
    assert_eq!(a, b);
    // With zero increments the exact-decay map is a pure exponential.
    let zero_path = BrownianPath::sample(2, 9, 1e-30, 50);
    let decayed =
        particle::ou_evolve(&v0, &zero_path, 0, 50, 0.02, OuScheme::ExactDecay).unwrap();
    for (d, v) in decayed.v.iter().zip(&v0.v) {
        assert_abs_diff_eq!(*d, v * (-1.0f64).exp(), epsilon = 1e-9);
    }
}

#[test]
fn stationary_sample_moments() {
    let n = 20_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for seed in 0..n {
        let v = particle::ou_stationary_sample(seed, 1).v[0];
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    assert!(mean.abs() < 0.02);
    assert!((var - 1.0).abs() < 0.03);
}

#[test]
fn fstat_reduces_to_ground_state_at_zero_lambda() {
    let basis = Basis::new(TruncationSpec::new(1, 0, 8)).unwrap();
    let v = particle::ou_stationary_sample(3, 1);
    let (state, tail) = particle::fstat_spectral(0.0, &v, &basis).unwrap();
    assert_eq!(tail, 0.0);
    assert_eq!(state.coeff(&[0], &[0]).re, 1.0);
    assert_abs_diff_eq!(state.norm_sq(), 1.0, epsilon = 1e-15);
    // λ >= 1 is not square integrable.
    assert!(particle::fstat_spectral(1.0, &v, &basis).is_err());
}

#[test]
fn fstat_is_a_discrete_fixed_point_up_to_scheme_order() {
    // One Heun step applied to the stationary profile, driven by the
    // same increment as the center process, lands on the profile of
    // the evolved center to higher order than the step itself.
    let basis = Basis::new(TruncationSpec::new(1, 0, 20)).unwrap();
    let lambda = 0.4;
    let noise = NoiseSpec::canonical_constant(1, lambda);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let dt = 1e-3;
    let path = BrownianPath::sample(1, 55, dt, 1);
    let v = particle::ou_stationary_sample(19, 1);
    let (g0, tail) = particle::fstat_spectral(lambda, &v, &basis).unwrap();
    assert!(tail < 1e-10);
    let config = SolverConfig::new(Scheme::HeunStratonovich, dt, dt, lambda);
    let stepped = solver::step_heun_strat(&g0, &bundle, &path, 0, &config);
    let v1 = particle::ou_evolve(&v, &path, 0, 1, dt, OuScheme::Heun).unwrap();
    let (g1, _) = particle::fstat_spectral(lambda, &v1, &basis).unwrap();
    let worst = stepped
        .coeffs()
        .iter()
        .zip(g1.coeffs())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(worst < 20.0 * dt.powf(1.5), "fixed-point defect {worst:.3e}");
}

#[test]
fn moment_comparison_against_matched_samples() {
    let basis = Basis::new(TruncationSpec::new(1, 0, 16)).unwrap();
    let lambda = 0.3;
    let v = particle::ou_stationary_sample(61, 1);
    let (state, _) = particle::fstat_spectral(lambda, &v, &basis).unwrap();
    let shift = lambda / std::f64::consts::SQRT_2 * v.v[0];
    // Particles drawn from the same shifted Maxwellian.
    let count = 50_000;
    let mut ens = ParticleEnsemble::maxwellian(count, 1, 67);
    for vel in ens.velocities.iter_mut() {
        *vel += shift;
    }
    let rep = particle::compare_moments(&state, &ens).unwrap();
    let mc = 3.0 / (count as f64).sqrt();
    assert!(rep.mass_delta < 1e-12);
    assert!(rep.mean_velocity_delta[0] < 3.0 * mc);
    assert!(rep.second_moment_delta[0] < 10.0 * mc);
    // Empty ensembles are rejected.
    let empty = ParticleEnsemble {
        n_dim: 1,
        positions: vec![],
        velocities: vec![],
    };
    assert!(particle::compare_moments(&state, &empty).is_err());
}
