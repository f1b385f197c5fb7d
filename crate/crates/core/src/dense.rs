//! Dense brute-force counterparts of the sparse operators, built by
//! applying coefficient-space primitives column by column. Intended
//! for validation and small-truncation baselines, not for time
//! stepping.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

use crate::basis::{Basis, SpectralState};

/// Matrix of a linear coefficient-space map, one basis vector at a time.
pub fn matrix_of(
    basis: &Arc<Basis>,
    op: impl Fn(&SpectralState) -> SpectralState,
) -> DMatrix<Complex64> {
    let dim = basis.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let idx = basis.index(col);
        let e = SpectralState::basis_vector(basis, &idx.k, &idx.l).unwrap();
        let out = op(&e);
        for (row, &v) in out.coeffs().iter().enumerate() {
            m[(row, col)] = v;
        }
    }
    m
}

/// Dense annihilation operator summed over axes is not meaningful;
/// per-axis builders are what the identities need.
pub fn lowering(basis: &Arc<Basis>, axis: usize) -> DMatrix<Complex64> {
    matrix_of(basis, |s| s.apply_lower(axis))
}

pub fn raising(basis: &Arc<Basis>, axis: usize) -> DMatrix<Complex64> {
    matrix_of(basis, |s| s.apply_raise(axis))
}

pub fn grad_x(basis: &Arc<Basis>, axis: usize) -> DMatrix<Complex64> {
    matrix_of(basis, |s| s.apply_grad_x(axis))
}

/// Transport v·∇_x from the primitives (raise + lower, then the
/// Fourier factor), with the Galerkin drop at the top Hermite level.
pub fn transport(basis: &Arc<Basis>) -> DMatrix<Complex64> {
    let dim = basis.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for axis in 0..basis.n_dim() {
        let part = matrix_of(basis, |s| {
            s.apply_raise(axis)
                .add(&s.apply_lower(axis))
                .apply_grad_x(axis)
        });
        m += part;
    }
    m
}

/// Diagonal projector onto Hermite degrees `|l| <= cutoff`.
pub fn hermite_projector(basis: &Arc<Basis>, cutoff: u32) -> DMatrix<Complex64> {
    let dim = basis.dim();
    DMatrix::from_fn(dim, dim, |r, c| {
        if r == c && basis.hermite_total(r) <= cutoff {
            Complex64::ONE
        } else {
            Complex64::ZERO
        }
    })
}

/// Diagonal Fokker-Planck operator (eigenvalues -|l|).
pub fn fokker_planck(basis: &Arc<Basis>) -> DMatrix<Complex64> {
    let dim = basis.dim();
    DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(-(basis.hermite_total(r) as f64), 0.0)
        } else {
            Complex64::ZERO
        }
    })
}

/// Matrix exponential (nalgebra Padé scaling-and-squaring).
pub fn expm(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.exp()
}

pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
