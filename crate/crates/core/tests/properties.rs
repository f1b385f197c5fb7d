//! Property tests for the algebraic invariants that must hold for any
//! truncation and any state.

use proptest::prelude::*;

use kinfp::basis::{Basis, SpectralState, TruncationSpec};
use kinfp::diagnostics::{self, FloorMode};
use kinfp::noise::BrownianPath;

fn random_state(n: usize, m_x: usize, m_v: usize, seed: u64, mass: f64) -> SpectralState {
    let basis = Basis::new(TruncationSpec::new(n, m_x, m_v)).unwrap();
    SpectralState::random_mass(&basis, seed, mass)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ladder_adjointness(
        n in 1usize..=2,
        m_x in 0usize..=2,
        m_v in 2usize..=5,
        seed_f in 0u64..1000,
        seed_h in 1000u64..2000,
        axis_pick in 0usize..2,
        mass in -1.0f64..1.0,
    ) {
        let axis = axis_pick % n;
        let basis = Basis::new(TruncationSpec::new(n, m_x, m_v)).unwrap();
        let f = SpectralState::random_mass(&basis, seed_f, mass).project(m_x, m_v - 1);
        let h = SpectralState::random_mass(&basis, seed_h, 0.3);
        let lhs = f.apply_raise(axis).inner(&h);
        let rhs = f.inner(&h.apply_lower(axis));
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn projection_contracts_and_is_idempotent(
        n in 1usize..=2,
        m_x in 0usize..=2,
        m_v in 1usize..=5,
        k0 in 0usize..=2,
        l0 in 0usize..=5,
        seed in 0u64..500,
    ) {
        let s = random_state(n, m_x, m_v, seed, 0.7);
        let p = s.project(k0, l0);
        prop_assert!(p.norm_sq() <= s.norm_sq() + 1e-14);
        let pp = p.project(k0, l0);
        prop_assert_eq!(p.coeffs(), pp.coeffs());
    }

    #[test]
    fn symmetry_survives_every_primitive(
        n in 1usize..=2,
        m_x in 1usize..=2,
        m_v in 1usize..=4,
        seed in 0u64..500,
        axis_pick in 0usize..2,
    ) {
        let axis = axis_pick % n;
        let s = random_state(n, m_x, m_v, seed, -0.4);
        prop_assert!(s.hermitian_defect() < 1e-14);
        prop_assert!(s.apply_raise(axis).hermitian_defect() < 1e-14);
        prop_assert!(s.apply_lower(axis).hermitian_defect() < 1e-14);
        prop_assert!(s.apply_grad_x(axis).hermitian_defect() < 1e-14);
        prop_assert!(s.project(1, 2).hermitian_defect() < 1e-14);
    }

    #[test]
    fn parseval_under_scaling(
        seed in 0u64..500,
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
    ) {
        let s = random_state(1, 1, 3, seed, 0.5);
        let a = num_complex::Complex64::new(re, im);
        let scaled = s.scale(a);
        prop_assert!((scaled.norm_sq() - a.norm_sqr() * s.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_recovers_exact_exponentials(
        rate in 0.1f64..5.0,
        amp in 0.05f64..20.0,
    ) {
        let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| amp * (-rate * t).exp()).collect();
        let fit = diagnostics::fit_decay(&times, &values, (0.0, 3.0), FloorMode::Zero).unwrap();
        prop_assert!((fit.rate - rate).abs() < 1e-6);
    }

    #[test]
    fn brownian_refinement_roundtrip(
        seed in 0u64..10_000,
        steps in 1usize..64,
        fields in 1usize..3,
    ) {
        let path = BrownianPath::sample(fields, seed, 0.125, steps);
        let fine = path.refine().refine();
        let back = fine.coarsen().unwrap().coarsen().unwrap();
        for j in 0..fields {
            prop_assert_eq!(back.increments(j), path.increments(j));
        }
    }
}
