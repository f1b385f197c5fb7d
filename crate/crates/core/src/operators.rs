//! Assembly of the truncated evolution operators.
//!
//! The dynamics integrated by the solver is
//!
//! ```text
//!   dg = -A g dt + L g dt + λ² C g dt + λ Σ_j B_j g Δβ_j      (Itô)
//!   dg = -A g dt + L g dt           + λ Σ_j B_j g ∘ Δβ_j      (Stratonovich)
//! ```
//!
//! with `A` the projected transport, `L` the diagonal Fokker-Planck
//! operator (eigenvalues -|l|), `B_j` the projected noise actions
//! `Π(F_j · raise)` and `C = ½ Σ_j B_j B_j` the drift that converts
//! between the two forms. All matrices are assembled once and shared
//! read-only.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::basis::{Basis, SpectralState};
use crate::noise::{FieldSpec, NoiseSpec};
use crate::sparse::CscMatrix;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("field {index}: dimension {got} does not match basis dimension {expected}")]
    FieldDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone)]
pub struct OperatorBundle {
    basis: Arc<Basis>,
    transport: CscMatrix,
    fp_diag: Vec<f64>,
    noise_ops: Vec<CscMatrix>,
    strat_corr: CscMatrix,
}

/// Transport `Π (v·∇_x)`: the Fourier factor 2πi k_a composed with the
/// ladder sum, raising contributions above m_v dropped.
pub fn assemble_transport(basis: &Arc<Basis>) -> CscMatrix {
    let mut triplets = Vec::new();
    let tau = std::f64::consts::TAU;
    for col in 0..basis.dim() {
        let k = basis.fourier_mode(col).to_vec();
        let l = basis.hermite_degrees(col).to_vec();
        for axis in 0..basis.n_dim() {
            if k[axis] == 0 {
                continue;
            }
            let factor = Complex64::new(0.0, tau * k[axis] as f64);
            if let Some(down) = basis.lowered_ordinal(col, axis) {
                triplets.push((down, col, factor * (l[axis] as f64).sqrt()));
            }
            if let Some(up) = basis.raised_ordinal(col, axis) {
                triplets.push((up, col, factor * (l[axis] as f64 + 1.0).sqrt()));
            }
        }
    }
    CscMatrix::from_triplets(basis.dim(), basis.dim(), triplets)
}

/// Eigenvalues -|l| of the Fokker-Planck operator on the basis.
pub fn fokker_planck_diagonal(basis: &Arc<Basis>) -> Vec<f64> {
    (0..basis.dim())
        .map(|ord| -(basis.hermite_total(ord) as f64))
        .collect()
}

fn field_raise_triplets(
    basis: &Arc<Basis>,
    col: usize,
    axis: usize,
    amp: Complex64,
    k_shift: &[i64],
    triplets: &mut Vec<(usize, usize, Complex64)>,
) {
    if amp == Complex64::ZERO {
        return;
    }
    let l = basis.hermite_degrees(col);
    let mut l_up = l.to_vec();
    l_up[axis] += 1;
    let k: Vec<i64> = basis
        .fourier_mode(col)
        .iter()
        .zip(k_shift)
        .map(|(&ka, &sa)| ka + sa)
        .collect();
    if let Some(row) = basis.flat_index(&k, &l_up) {
        triplets.push((row, col, amp * (l[axis] as f64 + 1.0).sqrt()));
    }
}

/// One projected noise action `Π (F · raise)`.
pub fn assemble_noise_op(basis: &Arc<Basis>, field: &FieldSpec) -> Result<CscMatrix, OperatorError> {
    if field.n_dim() != basis.n_dim() {
        return Err(OperatorError::FieldDimension {
            index: 0,
            got: field.n_dim(),
            expected: basis.n_dim(),
        });
    }
    let zero_shift = vec![0i64; basis.n_dim()];
    let mut triplets = Vec::new();
    for col in 0..basis.dim() {
        match field {
            FieldSpec::Constant { value } => {
                for (axis, &va) in value.iter().enumerate() {
                    field_raise_triplets(
                        basis,
                        col,
                        axis,
                        Complex64::new(va, 0.0),
                        &zero_shift,
                        &mut triplets,
                    );
                }
            }
            FieldSpec::FourierMode { mode, .. } => {
                let amp = field.amplitude();
                let neg: Vec<i64> = mode.iter().map(|&m| -m).collect();
                for (axis, &a) in amp.iter().enumerate() {
                    field_raise_triplets(basis, col, axis, a, mode, &mut triplets);
                    field_raise_triplets(basis, col, axis, a.conj(), &neg, &mut triplets);
                }
            }
        }
    }
    Ok(CscMatrix::from_triplets(basis.dim(), basis.dim(), triplets))
}

/// Itô-Stratonovich conversion drift `½ Σ_j B_j B_j`, with the interior
/// projection between the factors (each B_j is already projected).
pub fn assemble_strat_correction(noise_ops: &[CscMatrix], dim: usize) -> CscMatrix {
    let mut acc = CscMatrix::from_triplets(dim, dim, Vec::new());
    for b in noise_ops {
        let sq = b.matmul(b);
        let mut triplets: Vec<_> = acc.triplets().collect();
        triplets.extend(sq.triplets().map(|(r, c, v)| (r, c, v * 0.5)));
        acc = CscMatrix::from_triplets(dim, dim, triplets);
    }
    acc
}

impl OperatorBundle {
    pub fn assemble(basis: &Arc<Basis>, noise: &NoiseSpec) -> Result<Self, OperatorError> {
        let transport = assemble_transport(basis);
        let fp_diag = fokker_planck_diagonal(basis);
        let mut noise_ops = Vec::with_capacity(noise.fields.len());
        for (index, field) in noise.fields.iter().enumerate() {
            let op = assemble_noise_op(basis, field).map_err(|e| match e {
                OperatorError::FieldDimension { got, expected, .. } => {
                    OperatorError::FieldDimension {
                        index,
                        got,
                        expected,
                    }
                }
            })?;
            noise_ops.push(op);
        }
        let strat_corr = assemble_strat_correction(&noise_ops, basis.dim());
        Ok(OperatorBundle {
            basis: basis.clone(),
            transport,
            fp_diag,
            noise_ops,
            strat_corr,
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn transport(&self) -> &CscMatrix {
        &self.transport
    }

    pub fn fp_diagonal(&self) -> &[f64] {
        &self.fp_diag
    }

    pub fn noise_ops(&self) -> &[CscMatrix] {
        &self.noise_ops
    }

    pub fn strat_correction(&self) -> &CscMatrix {
        &self.strat_corr
    }

    /// y = L x (diagonal scaling by -|l|).
    pub fn apply_fp(&self, x: &[Complex64], y: &mut [Complex64]) {
        for ((yi, xi), &d) in y.iter_mut().zip(x).zip(&self.fp_diag) {
            *yi = xi * d;
        }
    }

    pub fn apply_fp_state(&self, state: &SpectralState) -> SpectralState {
        let mut out = state.clone();
        for (c, &d) in out.coeffs_mut().iter_mut().zip(&self.fp_diag) {
            *c *= d;
        }
        out
    }

    /// Coordinate-format dump `row col re im` (one matrix per call).
    pub fn dump_coordinate(m: &CscMatrix, mut w: impl Write) -> std::io::Result<()> {
        for (r, c, v) in m.triplets() {
            writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::TruncationSpec;
    use crate::dense;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn basis(n: usize, m_x: usize, m_v: usize) -> Arc<Basis> {
        Basis::new(TruncationSpec::new(n, m_x, m_v)).unwrap()
    }

    fn canonical(n: usize) -> NoiseSpec {
        NoiseSpec::new(
            (0..n)
                .map(|a| {
                    let mut v = vec![0.0; n];
                    v[a] = 1.0;
                    FieldSpec::constant(v)
                })
                .collect(),
            0.5,
        )
    }

    #[test]
    fn transport_vanishes_on_homogeneous_modes() {
        let b = basis(1, 2, 4);
        let a = assemble_transport(&b);
        for l in 0..=4u32 {
            let e = SpectralState::basis_vector(&b, &[0], &[l]).unwrap();
            let mut out = vec![Complex64::ZERO; b.dim()];
            a.apply(e.coeffs(), &mut out);
            assert!(out.iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn transport_column_formula() {
        // N=1: A e_{k,l} = 2πik (sqrt(l) e_{k,l-1} + sqrt(l+1) e_{k,l+1})
        let b = basis(1, 2, 5);
        let a = assemble_transport(&b);
        let e = SpectralState::basis_vector(&b, &[2], &[3]).unwrap();
        let mut out = vec![Complex64::ZERO; b.dim()];
        a.apply(e.coeffs(), &mut out);
        let s = SpectralState::from_coeffs(&b, out).unwrap();
        let tau = std::f64::consts::TAU;
        assert_abs_diff_eq!(s.coeff(&[2], &[2]).im, 2.0 * tau * 3f64.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(s.coeff(&[2], &[4]).im, 2.0 * tau * 4f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn transport_matches_primitive_composition() {
        for (n, m_x, m_v) in [(1, 2, 4), (2, 1, 3)] {
            let b = basis(n, m_x, m_v);
            let sparse = assemble_transport(&b).to_dense();
            let brute = dense::transport(&b);
            assert!(dense::max_abs(&(sparse - brute)) < 1e-13);
        }
    }

    #[test]
    fn transport_skew_on_interior_states() {
        let b = basis(1, 2, 5);
        let a = assemble_transport(&b);
        let g = SpectralState::random_mass(&b, 3, 0.4).project(2, 4);
        let mut out = vec![Complex64::ZERO; b.dim()];
        a.apply(g.coeffs(), &mut out);
        let ag = SpectralState::from_coeffs(&b, out).unwrap();
        assert_abs_diff_eq!(g.inner(&ag).re, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn constant_noise_op_is_scaled_raise() {
        let b = basis(1, 1, 3);
        let op = assemble_noise_op(&b, &FieldSpec::constant(vec![1.0])).unwrap();
        for l in 0..3u32 {
            let e = SpectralState::basis_vector(&b, &[1], &[l]).unwrap();
            let mut out = vec![Complex64::ZERO; b.dim()];
            op.apply(e.coeffs(), &mut out);
            let s = SpectralState::from_coeffs(&b, out).unwrap();
            assert_abs_diff_eq!(
                s.coeff(&[1], &[l + 1]).re,
                (l as f64 + 1.0).sqrt(),
                epsilon = 1e-15
            );
        }
        // Zero field gives the zero matrix.
        let z = assemble_noise_op(&b, &FieldSpec::constant(vec![0.0])).unwrap();
        assert_eq!(z.nnz(), 0);
    }

    #[test]
    fn mode_field_support_pattern() {
        let b = basis(1, 2, 2);
        let op = assemble_noise_op(
            &b,
            &FieldSpec::fourier_mode(vec![1], vec![Complex64::new(0.1, 0.05)]),
        )
        .unwrap();
        for (r, c, _) in op.triplets() {
            let rk = b.fourier_mode(r)[0];
            let ck = b.fourier_mode(c)[0];
            assert_eq!((rk - ck).abs(), 1, "k shift must be ±1");
            let rl = b.hermite_total(r);
            let cl = b.hermite_total(c);
            assert_eq!(rl, cl + 1, "Hermite degree raised by one");
        }
    }

    #[test]
    fn strat_correction_double_raise() {
        // Constant canonical noise, N=1: C e_{0,l} = ½ sqrt((l+1)(l+2)) e_{0,l+2}.
        let b = basis(1, 0, 6);
        let ops = vec![assemble_noise_op(&b, &FieldSpec::constant(vec![1.0])).unwrap()];
        let corr = assemble_strat_correction(&ops, b.dim());
        for l in 0..=4u32 {
            let e = SpectralState::basis_vector(&b, &[0], &[l]).unwrap();
            let mut out = vec![Complex64::ZERO; b.dim()];
            corr.apply(e.coeffs(), &mut out);
            let s = SpectralState::from_coeffs(&b, out).unwrap();
            let lf = l as f64;
            assert_abs_diff_eq!(
                s.coeff(&[0], &[l + 2]).re,
                0.5 * ((lf + 1.0) * (lf + 2.0)).sqrt(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn strat_correction_matches_dense_product() {
        let b = basis(1, 1, 4);
        let noise = NoiseSpec::new(
            vec![
                FieldSpec::constant(vec![0.5]),
                FieldSpec::fourier_mode(vec![1], vec![Complex64::new(0.05, 0.02)]),
            ],
            0.5,
        );
        let bundle = OperatorBundle::assemble(&b, &noise).unwrap();
        let mut expected = DMatrix::zeros(b.dim(), b.dim());
        for op in bundle.noise_ops() {
            let d = op.to_dense();
            expected += &d * &d * Complex64::new(0.5, 0.0);
        }
        assert!(dense::max_abs(&(bundle.strat_correction().to_dense() - expected)) < 1e-13);
    }

    #[test]
    fn fp_spectrum_and_dissipation() {
        let b = basis(1, 1, 4);
        let noise = canonical(1);
        let bundle = OperatorBundle::assemble(&b, &noise).unwrap();
        let e = SpectralState::basis_vector(&b, &[0], &[2]).unwrap();
        let le = bundle.apply_fp_state(&e);
        assert_abs_diff_eq!(le.coeff(&[0], &[2]).re, -2.0, epsilon = 1e-15);
        // <g, Lg> = -|lower g|^2 for every truncated state.
        let g = SpectralState::random_mass(&b, 7, 0.2);
        let lg = bundle.apply_fp_state(&g);
        let lower_sq: f64 = (0..1).map(|a| g.apply_lower(a).norm_sq()).sum();
        assert_abs_diff_eq!(g.inner(&lg).re, -lower_sq, epsilon = 1e-12);
    }

    #[test]
    fn mass_row_is_structurally_empty() {
        let b = basis(2, 1, 2);
        let noise = NoiseSpec::new(
            vec![
                FieldSpec::constant(vec![0.4, 0.1]),
                FieldSpec::fourier_mode(
                    vec![1, 0],
                    vec![Complex64::new(0.03, 0.01), Complex64::new(0.0, 0.02)],
                ),
            ],
            0.3,
        );
        let bundle = OperatorBundle::assemble(&b, &noise).unwrap();
        let ground = b.flat_index(&[0, 0], &[0, 0]).unwrap();
        assert!(bundle.transport().row_is_empty(ground));
        assert!(bundle.strat_correction().row_is_empty(ground));
        for op in bundle.noise_ops() {
            assert!(op.row_is_empty(ground));
        }
        assert_eq!(bundle.fp_diagonal()[ground], 0.0);
    }
}
