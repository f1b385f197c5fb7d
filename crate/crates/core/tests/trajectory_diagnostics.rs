//! Termwise inequality margins and regularization tables evaluated on
//! real trajectories.

use approx::assert_abs_diff_eq;

use kinfp::basis::{Basis, SpectralState, TruncationSpec};
use kinfp::diagnostics::{self, DiagnosticsParams};
use kinfp::noise::{BrownianPath, NoiseSpec};
use kinfp::operators::OperatorBundle;
use kinfp::solver::{self, Scheme, SolverConfig};

/// Snapshot states of one realization at the capture cadence.
fn snapshot_run_with(
    scheme: Scheme,
    bundle: &OperatorBundle,
    g_in: &SpectralState,
    lambda: f64,
    seed: u64,
    dt: f64,
    t_end: f64,
    every: usize,
) -> (Vec<f64>, Vec<SpectralState>) {
    let steps = (t_end / dt).round() as usize;
    let path = BrownianPath::sample(bundle.noise_ops().len(), seed, dt, steps);
    let config = SolverConfig::new(scheme, dt, t_end, lambda)
        .with_diag_every(every)
        .with_snapshots(every);
    let traj = solver::integrate(g_in, bundle, &path, &config, &DiagnosticsParams::default())
        .unwrap();
    let times = traj.snapshots.iter().map(|(t, _)| *t).collect();
    let states = traj.snapshots.into_iter().map(|(_, s)| s).collect();
    (times, states)
}

fn snapshot_run(
    bundle: &OperatorBundle,
    g_in: &SpectralState,
    lambda: f64,
    seed: u64,
    dt: f64,
    t_end: f64,
    every: usize,
) -> (Vec<f64>, Vec<SpectralState>) {
    snapshot_run_with(Scheme::ExponentialEulerIto, bundle, g_in, lambda, seed, dt, t_end, every)
}

#[test]
fn eigenmode_norm_balance_is_an_identity() {
    // λ=0, g = e_{0,(1)}: d/dt ½|g|² = -|Dg|² exactly, so the first
    // margin reduces to the centered-difference error O(dt²).
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.0);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::basis_vector(&basis, &[0], &[1]).unwrap();
    let (times, states) = snapshot_run(&bundle, &g, 0.0, 5, 1e-3, 1.0, 10);
    let series: Vec<diagnostics::EnsembleFunctionals> = times
        .iter()
        .zip(&states)
        .map(|(&t, s)| diagnostics::ensemble_functionals(std::slice::from_ref(s), t))
        .collect();
    let margins = diagnostics::termwise_margins(&series, 0.0, 1);
    for m in &margins {
        assert_abs_diff_eq!(m.norm_balance, 0.0, epsilon = 1e-4);
    }
}

#[test]
fn norm_derivative_two_ways_agree() {
    // Finite difference of |g|² vs -2|Dg|² plus the noise production,
    // on a noisy run; agreement to O(dt) per unit value.
    let basis = Basis::new(TruncationSpec::new(1, 1, 6)).unwrap();
    let lambda = 0.2;
    let noise = NoiseSpec::canonical_constant(1, lambda);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::random_mass(&basis, 9, 1.0);
    // Ensemble of pathwise runs; the Itô production term
    // λ² Σ_j |B_j g|² + λ² <(ΣB_j²/... )g, g> averages out pathwise
    // fluctuations only in expectation, so compare ensemble means.
    let size = 512;
    let dt = 5e-4;
    let every = 20;
    let mut all: Vec<Vec<SpectralState>> = Vec::new();
    let mut times = Vec::new();
    for i in 0..size {
        let (t, s) = snapshot_run(&bundle, &g, lambda, 1000 + i, dt, 0.25, every);
        times = t;
        all.push(s);
    }
    let n_caps = times.len();
    let series: Vec<diagnostics::EnsembleFunctionals> = (0..n_caps)
        .map(|ci| {
            let states: Vec<SpectralState> =
                all.iter().map(|run| run[ci].clone()).collect();
            diagnostics::ensemble_functionals(&states, times[ci])
        })
        .collect();
    let margins = diagnostics::termwise_margins(&series, lambda, 1);
    // The margin is RHS - LHS >= 0 in expectation; its absolute size
    // stays bounded by the production bound itself.
    for m in &margins {
        assert!(
            m.norm_balance > -0.02,
            "norm balance {} at t = {}",
            m.norm_balance,
            m.t
        );
    }
}

#[test]
fn small_noise_margins_stay_positive() {
    // Soft diagnostic at λ = 0.05: all four margins on ensemble means.
    let basis = Basis::new(TruncationSpec::new(1, 2, 6)).unwrap();
    let lambda = 0.05;
    let noise = NoiseSpec::canonical_constant(1, lambda);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::ground(&basis, 1.0)
        .add(&SpectralState::single_mode(&basis, &[1], &[1], 0.5).unwrap());
    let size = 64;
    let dt = 5e-4;
    let mut all: Vec<Vec<SpectralState>> = Vec::new();
    let mut times = Vec::new();
    for i in 0..size {
        let (t, s) = snapshot_run_with(
            Scheme::HeunStratonovich,
            &bundle,
            &g,
            lambda,
            7000 + i,
            dt,
            1.0,
            20,
        );
        times = t;
        all.push(s);
    }
    let series: Vec<diagnostics::EnsembleFunctionals> = (0..times.len())
        .map(|ci| {
            let states: Vec<SpectralState> =
                all.iter().map(|run| run[ci].clone()).collect();
            diagnostics::ensemble_functionals(&states, times[ci])
        })
        .collect();
    let margins = diagnostics::termwise_margins(&series, lambda, 1);
    let mut worst = f64::INFINITY;
    for m in &margins {
        worst = worst
            .min(m.norm_balance)
            .min(m.grad_balance)
            .min(m.d_balance)
            .min(m.cross_balance);
    }
    // Recorded as a soft check: report, and require no gross violation.
    println!("smallest termwise margin at λ=0.05: {worst:.4}");
    assert!(worst > -0.05, "gross termwise violation: {worst}");
}

#[test]
fn regularization_table_from_ground_state_is_zero() {
    let basis = Basis::new(TruncationSpec::new(1, 1, 4)).unwrap();
    let noise = NoiseSpec::canonical_constant(1, 0.0);
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let g = SpectralState::ground(&basis, 1.0);
    let (times, states) = snapshot_run(&bundle, &g, 0.0, 3, 1e-3, 0.5, 10);
    let params = DiagnosticsParams::default();
    let d_sq: Vec<f64> = states
        .iter()
        .zip(&times)
        .map(|(s, &t)| diagnostics::report(s, t, &params).d_sq)
        .collect();
    let grad_sq: Vec<f64> = states
        .iter()
        .zip(&times)
        .map(|(s, &t)| diagnostics::report(s, t, &params).grad_x_sq)
        .collect();
    let table = diagnostics::regularization_table(&times, &d_sq, &grad_sq, 0.5);
    assert_eq!(table.sup, 0.0);
}

#[test]
fn regularization_rates_are_stable_under_refinement() {
    // Rough initial data concentrated on high-k, l = 0 modes; the
    // weighted tables t|Dg|² and t³|∇g|² stay bounded and their sup
    // over a fixed window moves by < 20% when m_v doubles.
    let sup_for = |m_v: usize| -> f64 {
        let basis = Basis::new(TruncationSpec::new(1, 3, m_v)).unwrap();
        let noise = NoiseSpec::canonical_constant(1, 0.0);
        let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
        let g = SpectralState::single_mode(&basis, &[3], &[0], 1.0)
            .unwrap()
            .add(&SpectralState::single_mode(&basis, &[2], &[0], 0.8).unwrap());
        let (times, states) = snapshot_run(&bundle, &g, 0.0, 11, 1e-4, 1.0, 100);
        let params = DiagnosticsParams::default();
        let d_sq: Vec<f64> = states
            .iter()
            .zip(&times)
            .map(|(s, &t)| diagnostics::report(s, t, &params).d_sq)
            .collect();
        let grad_sq: Vec<f64> = states
            .iter()
            .zip(&times)
            .map(|(s, &t)| diagnostics::report(s, t, &params).grad_x_sq)
            .collect();
        let in_window: Vec<usize> = times
            .iter()
            .enumerate()
            .filter(|(_, &t)| (0.01..=1.0).contains(&t))
            .map(|(i, _)| i)
            .collect();
        let t_sel: Vec<f64> = in_window.iter().map(|&i| times[i]).collect();
        let d_sel: Vec<f64> = in_window.iter().map(|&i| d_sq[i]).collect();
        let g_sel: Vec<f64> = in_window.iter().map(|&i| grad_sq[i]).collect();
        diagnostics::regularization_table(&t_sel, &d_sel, &g_sel, 1.0).sup
    };
    let coarse = sup_for(16);
    let fine = sup_for(32);
    assert!(coarse.is_finite() && coarse > 0.0);
    let rel = (fine - coarse).abs() / coarse;
    assert!(rel < 0.20, "sup moved {:.1}% under refinement", 100.0 * rel);
}
