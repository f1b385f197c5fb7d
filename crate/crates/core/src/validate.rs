//! Self-contained identity and oracle suite: operator algebra checks
//! against dense brute-force composition, ladder coefficients against
//! quadrature, covariance closed forms against numerical integration,
//! and path reproducibility. The CLI `validate` subcommand runs this
//! and fails on any red check.


use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{hermite_values, Basis, SpectralState, TruncationSpec};
use crate::dense;
use crate::diagnostics::{self, DiagnosticsParams};
use crate::noise::{BrownianPath, FieldSpec, NoiseSpec};
use crate::operators::OperatorBundle;
use crate::particle;
use crate::quadrature;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn bound(name: &str, value: f64, tol: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: value.is_finite() && value <= tol,
            detail: format!("max deviation {value:.3e} (tolerance {tol:.1e})"),
        }
    }

    fn flag(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn sum_ops(parts: Vec<DMatrix<Complex64>>) -> DMatrix<Complex64> {
    let mut it = parts.into_iter();
    let first = it.next().expect("nonempty");
    it.fold(first, |acc, m| acc + m)
}

/// Operator-algebra identities on dense matrices, restricted to the
/// interior (no mass on the top Hermite level) where the truncated
/// operators coincide with the exact ones.
pub fn operator_identities(n_dim: usize, m_x: usize, m_v: usize, tol: f64) -> Vec<CheckResult> {
    let basis = Basis::new(TruncationSpec::new(n_dim, m_x, m_v)).unwrap();
    let dim = basis.dim();
    let lower: Vec<_> = (0..n_dim).map(|a| dense::lowering(&basis, a)).collect();
    let raise: Vec<_> = (0..n_dim).map(|a| dense::raising(&basis, a)).collect();
    let grad: Vec<_> = (0..n_dim).map(|a| dense::grad_x(&basis, a)).collect();
    let transport = dense::transport(&basis);
    let fp = dense::fokker_planck(&basis);
    let interior = dense::hermite_projector(&basis, m_v as u32 - 1);
    let mut out = Vec::new();

    // L = -Σ_a raise_a lower_a, exact on the whole truncated space.
    let dstar_d = sum_ops((0..n_dim).map(|a| &raise[a] * &lower[a]).collect());
    out.push(CheckResult::bound(
        "fp_equals_minus_raise_lower",
        dense::max_abs(&(&fp + dstar_d)),
        tol,
    ));

    // L = N Id - Σ_a lower_a raise_a on interior states.
    let d_dstar = sum_ops((0..n_dim).map(|a| &lower[a] * &raise[a]).collect());
    let n_id = DMatrix::from_diagonal_element(dim, dim, Complex64::new(n_dim as f64, 0.0));
    out.push(CheckResult::bound(
        "fp_equals_nid_minus_lower_raise",
        dense::max_abs(&((&fp - (n_id - d_dstar)) * &interior)),
        tol,
    ));

    // {lower_a, A} = ∂_a on interior states.
    let mut comm_dev: f64 = 0.0;
    for a in 0..n_dim {
        let comm = &lower[a] * &transport - &transport * &lower[a];
        comm_dev = comm_dev.max(dense::max_abs(&((comm - &grad[a]) * &interior)));
    }
    out.push(CheckResult::bound(
        "transport_ladder_commutator",
        comm_dev,
        tol,
    ));

    // Transport is skew-Hermitian between interior states.
    let skew = &interior * (&transport + transport.adjoint()) * &interior;
    out.push(CheckResult::bound(
        "transport_skew_adjoint",
        dense::max_abs(&skew),
        tol,
    ));

    // |raise f|² = |lower f|² + N|f|² on random interior states.
    let mut dev: f64 = 0.0;
    for seed in 0..20 {
        let f = SpectralState::random_mass(&basis, seed, 0.5).project(m_x, m_v - 1);
        let raise_sq: f64 = (0..n_dim).map(|a| f.apply_raise(a).norm_sq()).sum();
        let lower_sq: f64 = (0..n_dim).map(|a| f.apply_lower(a).norm_sq()).sum();
        dev = dev.max((raise_sq - lower_sq - n_dim as f64 * f.norm_sq()).abs());
    }
    out.push(CheckResult::bound("ladder_norm_identity", dev, tol));
    out
}

/// Ladder coefficients against the finite-difference quadrature oracle.
pub fn ladder_oracle() -> Vec<CheckResult> {
    let eps = 1e-6;
    let mut dev_raise: f64 = 0.0;
    let mut dev_lower: f64 = 0.0;
    for j in 0..=6usize {
        let raise = quadrature::integrate(
            |v| {
                let dq = (hermite_values(j, v + eps)[j] - hermite_values(j, v - eps)[j])
                    / (2.0 * eps);
                let q = hermite_values(j + 1, v);
                (-dq + 0.5 * v * q[j]) * q[j + 1]
            },
            -14.0,
            14.0,
            2000,
        );
        dev_raise = dev_raise.max((raise - ((j + 1) as f64).sqrt()).abs());
        if j > 0 {
            let lower = quadrature::integrate(
                |v| {
                    let dq = (hermite_values(j, v + eps)[j] - hermite_values(j, v - eps)[j])
                        / (2.0 * eps);
                    let q = hermite_values(j, v);
                    (dq + 0.5 * v * q[j]) * q[j - 1]
                },
                -14.0,
                14.0,
                2000,
            );
            dev_lower = dev_lower.max((lower - (j as f64).sqrt()).abs());
        }
    }
    vec![
        CheckResult::bound("ladder_raise_quadrature", dev_raise, 1e-8),
        CheckResult::bound("ladder_lower_quadrature", dev_lower, 1e-8),
    ]
}

/// Sparse assembly against primitive composition at a small truncation.
pub fn assembly_against_primitives() -> Vec<CheckResult> {
    let basis = Basis::new(TruncationSpec::new(2, 1, 3)).unwrap();
    let noise = NoiseSpec::new(
        vec![
            FieldSpec::constant(vec![0.4, 0.2]),
            FieldSpec::fourier_mode(
                vec![1, -1],
                vec![Complex64::new(0.05, 0.01), Complex64::new(0.02, -0.03)],
            ),
        ],
        0.3,
    );
    let bundle = OperatorBundle::assemble(&basis, &noise).unwrap();
    let mut out = Vec::new();
    out.push(CheckResult::bound(
        "transport_assembly",
        dense::max_abs(&(bundle.transport().to_dense() - dense::transport(&basis))),
        1e-13,
    ));
    // Noise action by primitives: multiply-by-field then raise, summed.
    for (j, field) in noise.fields.iter().enumerate() {
        let brute = dense::matrix_of(&basis, |s| field_raise_primitive(s, field));
        out.push(CheckResult::bound(
            &format!("noise_op_assembly_{j}"),
            dense::max_abs(&(bundle.noise_ops()[j].to_dense() - brute)),
            1e-13,
        ));
    }
    let mut corr = DMatrix::zeros(basis.dim(), basis.dim());
    for op in bundle.noise_ops() {
        let d = op.to_dense();
        corr += &d * &d * Complex64::new(0.5, 0.0);
    }
    out.push(CheckResult::bound(
        "strat_correction_assembly",
        dense::max_abs(&(bundle.strat_correction().to_dense() - corr)),
        1e-13,
    ));
    out
}

fn field_raise_primitive(s: &SpectralState, field: &FieldSpec) -> SpectralState {
    let basis = s.basis().clone();
    let mut out = SpectralState::zero(&basis);
    match field {
        FieldSpec::Constant { value } => {
            for (a, &va) in value.iter().enumerate() {
                out = out.add(&s.apply_raise(a).scale(Complex64::new(va, 0.0)));
            }
        }
        FieldSpec::FourierMode { mode, .. } => {
            let amp = field.amplitude();
            for (a, &amp_a) in amp.iter().enumerate() {
                let raised = s.apply_raise(a);
                out = out.add(&shift_fourier(&raised, mode).scale(amp_a));
                let neg: Vec<i64> = mode.iter().map(|&m| -m).collect();
                out = out.add(&shift_fourier(&raised, &neg).scale(amp_a.conj()));
            }
        }
    }
    out
}

fn shift_fourier(s: &SpectralState, shift: &[i64]) -> SpectralState {
    let basis = s.basis().clone();
    let mut out = SpectralState::zero(&basis);
    for (ord, c) in s.coeffs().iter().enumerate() {
        if *c == Complex64::ZERO {
            continue;
        }
        let idx = basis.index(ord);
        let k: Vec<i64> = idx.k.iter().zip(shift).map(|(&ka, &sa)| ka + sa).collect();
        if let Some(target) = basis.flat_index(&k, &idx.l) {
            out.coeffs_mut()[target] += c;
        }
    }
    out
}

/// Dissipativity, Poincaré-type bound and the balance-functional
/// sandwich on random states.
pub fn state_inequalities() -> Vec<CheckResult> {
    let basis = Basis::new(TruncationSpec::new(1, 2, 5)).unwrap();
    let params = DiagnosticsParams::default();
    let (c1, c2) = params.sandwich_constants(1);
    let mut dissip_margin: f64 = f64::INFINITY;
    let mut poincare_margin: f64 = f64::INFINITY;
    let mut sandwich_ok = true;
    for seed in 0..1000 {
        let g = SpectralState::random_mass(&basis, seed, 0.4);
        let r = diagnostics::report(&g, 0.0, &params);
        // -<g, Lg> = |Dg|² >= |g - Π_loc g|²
        let loc = g.project(2, 0);
        let perp_sq = g.sub(&loc).norm_sq();
        dissip_margin = dissip_margin.min(r.d_sq - perp_sq);
        // |g|² <= |Dg|² + |Π_{m,m-1}∇g|² + ρ²
        let grad_cut_sq = diagnostics::second_order(&g).grad_cut_sq;
        poincare_margin = poincare_margin.min(r.d_sq + grad_cut_sq + r.mass * r.mass - r.norm_sq);
        let ratio = r.f_func / r.hypo_norm;
        sandwich_ok &= ratio >= c1 - 1e-12 && ratio <= c2 + 1e-12;
    }
    vec![
        CheckResult::flag(
            "fp_dissipativity",
            dissip_margin >= -1e-12,
            format!("smallest margin {dissip_margin:.3e}"),
        ),
        CheckResult::flag(
            "poincare_bound",
            poincare_margin >= -1e-12,
            format!("smallest margin {poincare_margin:.3e}"),
        ),
        CheckResult::flag(
            "balance_sandwich",
            sandwich_ok,
            format!("C1 = {c1:.4}, C2 = {c2:.4} over 1000 states"),
        ),
    ]
}

/// Covariance closed forms against quadrature and the long-time form.
pub fn covariance_checks() -> Vec<CheckResult> {
    let mut dev: f64 = 0.0;
    for &t in &[0.1, 1.0, 10.0] {
        let q = particle::q_covariance(t);
        let q11 = 2.0 * quadrature::integrate(|s| (1.0 - (-s).exp()).powi(2), 0.0, t, 400);
        let q12 =
            2.0 * quadrature::integrate(|s| (-s).exp() * (1.0 - (-s).exp()), 0.0, t, 400);
        let q22 = 2.0 * quadrature::integrate(|s| (-2.0 * s).exp(), 0.0, t, 400);
        dev = dev
            .max((q[0][0] - q11).abs())
            .max((q[0][1] - q12).abs())
            .max((q[1][1] - q22).abs());
    }
    let q20 = particle::q_covariance(20.0);
    let asym = [[2.0 * 20.0 - 3.0, 1.0], [1.0, 1.0]];
    let mut asym_dev: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            asym_dev = asym_dev.max((q20[i][j] - asym[i][j]).abs());
        }
    }
    let psd = {
        let q = particle::q_covariance(3.0);
        q[0][0] >= 0.0 && q[0][0] * q[1][1] - q[0][1] * q[1][0] >= -1e-15
    };
    vec![
        CheckResult::bound("covariance_quadrature", dev, 1e-10),
        CheckResult::bound("covariance_asymptote", asym_dev, 1e-7),
        CheckResult::flag("covariance_psd", psd, "2x2 minors nonnegative".into()),
    ]
}

/// Shifted-Maxwellian expansion against the quadrature oracle.
pub fn stationary_profile_checks() -> Vec<CheckResult> {
    let basis = Basis::new(TruncationSpec::new(1, 0, 24)).unwrap();
    let lambda = 0.4;
    let mut norm_dev: f64 = 0.0;
    let mut mass_dev: f64 = 0.0;
    for seed in [3u64, 17, 40] {
        let v = particle::ou_stationary_sample(seed, 1);
        let (state, tail) = particle::fstat_spectral(lambda, &v, &basis).unwrap();
        let shift = lambda / std::f64::consts::SQRT_2 * v.v[0];
        // |g|² = ∫ M(v-s)² / M(v) dv by quadrature.
        let tau = std::f64::consts::TAU;
        let quad = quadrature::integrate(
            |w| {
                let m_shift = (tau).sqrt().recip() * (-(w - shift) * (w - shift) / 2.0).exp();
                let m = (tau).sqrt().recip() * (-w * w / 2.0).exp();
                m_shift * m_shift / m
            },
            -16.0,
            16.0,
            3000,
        );
        norm_dev = norm_dev.max((state.norm_sq() + tail - quad).abs());
        // Mass of the shifted Maxwellian is one.
        let quad_mass = quadrature::integrate(
            |w| {
                let q = hermite_values(0, w)[0];
                state.evaluate(&[0.0], &[w]) * q
            },
            -16.0,
            16.0,
            3000,
        );
        mass_dev = mass_dev
            .max((state.mass() - 1.0).abs())
            .max((quad_mass - 1.0).abs().min(1.0));
    }
    vec![
        CheckResult::bound("fstat_norm_quadrature", norm_dev, 1e-9),
        CheckResult::bound("fstat_unit_mass", mass_dev, 1e-8),
    ]
}

/// Path determinism, increment variance, bridge consistency.
pub fn path_checks() -> Vec<CheckResult> {
    let a = BrownianPath::sample(2, 123, 0.01, 5000);
    let b = BrownianPath::sample(2, 123, 0.01, 5000);
    let identical = (0..2).all(|j| a.increments(j) == b.increments(j));
    let var: f64 = a.increments(0).iter().map(|x| x * x).sum::<f64>() / 5000.0;
    let fine = a.refine();
    let back = fine.coarsen().unwrap();
    let roundtrip = (0..2).all(|j| back.increments(j) == a.increments(j));
    let mut sum_dev: f64 = 0.0;
    for i in 0..a.steps() {
        sum_dev = sum_dev.max(
            (fine.increment(0, 2 * i) + fine.increment(0, 2 * i + 1) - a.increment(0, i)).abs(),
        );
    }
    vec![
        CheckResult::flag("path_determinism", identical, "same seed, same draws".into()),
        CheckResult::flag(
            "path_increment_variance",
            (var / 0.01 - 1.0).abs() < 0.05,
            format!("var/dt = {:.4}", var / 0.01),
        ),
        CheckResult::flag(
            "path_refine_coarsen_roundtrip",
            roundtrip,
            "bit-exact".into(),
        ),
        CheckResult::bound("path_refine_sum_consistency", sum_dev, 1e-15),
    ]
}

/// The full suite (A1-grade truncation for the dense identities).
pub fn run_all() -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.extend(operator_identities(1, 2, 6, 1e-12));
    out.extend(ladder_oracle());
    out.extend(assembly_against_primitives());
    out.extend(state_inequalities());
    out.extend(covariance_checks());
    out.extend(stationary_profile_checks());
    out.extend(path_checks());
    out
}
