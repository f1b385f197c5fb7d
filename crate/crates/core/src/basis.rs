//! Fourier x Hermite index algebra and coefficient storage.
//!
//! States live on the torus in position and on all of R^N in velocity.
//! The basis is the tensor product `p_k ⊗ q_l` of trigonometric modes
//! `p_k(x) = exp(2πi k·x)` and normalized Hermite functions `q_l`, with
//! `q_0(v) = (2π)^{-N/4} exp(-|v|²/4)` (the square root of the
//! Maxwellian) and the ladder relations
//!
//! ```text
//!   raise_a q_l = sqrt(l_a + 1) q_{l + e_a}
//!   lower_a q_l = sqrt(l_a)     q_{l - e_a}
//! ```
//!
//! Truncation keeps `|k|_∞ <= m_x` and `|l|_1 <= m_v`. Raising out of
//! the truncation drops the contribution (Galerkin projection).

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Hard cap on the flattened basis size; larger requests are a
/// configuration mistake, not a workload.
pub const MAX_BASIS_DIM: usize = 4_000_000;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("space dimension must be 1 or larger (got {0})")]
    ZeroDimension(usize),
    #[error("basis dimension {dim} exceeds the configured maximum {max}; truncation too large")]
    TooLarge { dim: usize, max: usize },
    #[error("states live on different bases")]
    BasisMismatch,
    #[error("index (k={k:?}, l={l:?}) outside the truncation")]
    IndexOutOfRange { k: Vec<i64>, l: Vec<u32> },
}

/// Truncation parameters: spatial/velocity dimension `n_dim`, Fourier
/// box radius `m_x` (sup norm) and Hermite simplex radius `m_v`
/// (degree sum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub n_dim: usize,
    pub m_x: usize,
    pub m_v: usize,
}

impl TruncationSpec {
    pub fn new(n_dim: usize, m_x: usize, m_v: usize) -> Self {
        TruncationSpec { n_dim, m_x, m_v }
    }

    /// Square truncation with `m_x = m_v = m`.
    pub fn square(n_dim: usize, m: usize) -> Self {
        TruncationSpec::new(n_dim, m, m)
    }

    pub fn fourier_count(&self) -> usize {
        (2 * self.m_x + 1).pow(self.n_dim as u32)
    }
}

/// One Fourier x Hermite index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub k: Vec<i64>,
    pub l: Vec<u32>,
}

impl MultiIndex {
    pub fn hermite_degree(&self) -> u32 {
        self.l.iter().sum()
    }

    pub fn fourier_sup(&self) -> i64 {
        self.k.iter().map(|k| k.abs()).max().unwrap_or(0)
    }
}

/// Enumerated, flattened basis for one truncation. Immutable once
/// built; shared behind `Arc` by states and operators.
#[derive(Debug)]
pub struct Basis {
    trunc: TruncationSpec,
    fourier: Vec<Vec<i64>>,
    hermite: Vec<Vec<u32>>,
    hermite_ord: HashMap<Vec<u32>, usize>,
    dim: usize,
}

fn enumerate_hermite(n_dim: usize, m_v: usize) -> Vec<Vec<u32>> {
    // Graded lexicographic: by total degree, then lexicographic.
    let mut out: Vec<Vec<u32>> = Vec::new();
    let mut current = vec![0u32; n_dim];
    for total in 0..=m_v as u32 {
        fn rec(axis: usize, left: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if axis + 1 == current.len() {
                current[axis] = left;
                out.push(current.clone());
                return;
            }
            for d in 0..=left {
                current[axis] = d;
                rec(axis + 1, left - d, current, out);
            }
        }
        rec(0, total, &mut current, &mut out);
    }
    out
}

fn enumerate_fourier(n_dim: usize, m_x: usize) -> Vec<Vec<i64>> {
    let radius = m_x as i64;
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..n_dim {
        let mut next = Vec::with_capacity(out.len() * (2 * m_x + 1));
        for prefix in &out {
            for k in -radius..=radius {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

impl Basis {
    pub fn new(trunc: TruncationSpec) -> Result<Arc<Basis>, BasisError> {
        if trunc.n_dim == 0 {
            return Err(BasisError::ZeroDimension(0));
        }
        let fourier = enumerate_fourier(trunc.n_dim, trunc.m_x);
        let hermite = enumerate_hermite(trunc.n_dim, trunc.m_v);
        let dim = fourier.len() * hermite.len();
        if dim > MAX_BASIS_DIM {
            return Err(BasisError::TooLarge {
                dim,
                max: MAX_BASIS_DIM,
            });
        }
        let hermite_ord = hermite
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Ok(Arc::new(Basis {
            trunc,
            fourier,
            hermite,
            hermite_ord,
            dim,
        }))
    }

    pub fn truncation(&self) -> TruncationSpec {
        self.trunc
    }

    pub fn n_dim(&self) -> usize {
        self.trunc.n_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hermite_count(&self) -> usize {
        self.hermite.len()
    }

    pub fn fourier_count(&self) -> usize {
        self.fourier.len()
    }

    /// Deterministic ordering: Fourier-major, graded-lex Hermite minor.
    pub fn index(&self, ordinal: usize) -> MultiIndex {
        let nh = self.hermite.len();
        MultiIndex {
            k: self.fourier[ordinal / nh].clone(),
            l: self.hermite[ordinal % nh].clone(),
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, MultiIndex)> + '_ {
        (0..self.dim).map(|i| (i, self.index(i)))
    }

    pub fn fourier_mode(&self, ordinal: usize) -> &[i64] {
        &self.fourier[ordinal / self.hermite.len()]
    }

    pub fn hermite_degrees(&self, ordinal: usize) -> &[u32] {
        &self.hermite[ordinal % self.hermite.len()]
    }

    /// Total Hermite degree `|l|` of a flattened ordinal.
    pub fn hermite_total(&self, ordinal: usize) -> u32 {
        self.hermite_degrees(ordinal).iter().sum()
    }

    fn fourier_ordinal(&self, k: &[i64]) -> Option<usize> {
        let m = self.trunc.m_x as i64;
        let width = (2 * self.trunc.m_x + 1) as usize;
        let mut ord = 0usize;
        for &ka in k {
            if ka.abs() > m {
                return None;
            }
            ord = ord * width + (ka + m) as usize;
        }
        Some(ord)
    }

    fn hermite_ordinal(&self, l: &[u32]) -> Option<usize> {
        self.hermite_ord.get(l).copied()
    }

    /// Flattened position of (k, l), or `None` outside the truncation.
    pub fn flat_index(&self, k: &[i64], l: &[u32]) -> Option<usize> {
        debug_assert_eq!(k.len(), self.trunc.n_dim);
        debug_assert_eq!(l.len(), self.trunc.n_dim);
        let f = self.fourier_ordinal(k)?;
        let h = self.hermite_ordinal(l)?;
        Some(f * self.hermite.len() + h)
    }

    /// Ordinal of the conjugate partner (-k, l).
    pub fn conjugate_ordinal(&self, ordinal: usize) -> usize {
        let nh = self.hermite.len();
        let k: Vec<i64> = self.fourier[ordinal / nh].iter().map(|&x| -x).collect();
        self.fourier_ordinal(&k).expect("negation stays in the box") * nh + ordinal % nh
    }

    /// Ordinal of (k, l + e_axis) when it stays inside the truncation.
    pub fn raised_ordinal(&self, ordinal: usize, axis: usize) -> Option<usize> {
        let nh = self.hermite.len();
        let l = &self.hermite[ordinal % nh];
        let mut up = l.clone();
        up[axis] += 1;
        self.hermite_ordinal(&up)
            .map(|h| ordinal / nh * nh + h)
    }

    /// Ordinal of (k, l - e_axis) when `l_axis > 0`.
    pub fn lowered_ordinal(&self, ordinal: usize, axis: usize) -> Option<usize> {
        let nh = self.hermite.len();
        let l = &self.hermite[ordinal % nh];
        if l[axis] == 0 {
            return None;
        }
        let mut down = l.clone();
        down[axis] -= 1;
        self.hermite_ordinal(&down)
            .map(|h| ordinal / nh * nh + h)
    }
}

/// Coefficient vector of a truncated state; entry `ordinal` holds
/// `<g, e_{k,l}>`. Real-valued states satisfy the Hermitian symmetry
/// `d_{-k,l} = conj(d_{k,l})`.
#[derive(Debug, Clone)]
pub struct SpectralState {
    basis: Arc<Basis>,
    coeffs: Vec<Complex64>,
}

impl SpectralState {
    pub fn zero(basis: &Arc<Basis>) -> Self {
        SpectralState {
            basis: basis.clone(),
            coeffs: vec![Complex64::ZERO; basis.dim()],
        }
    }

    /// Unit basis vector e_{k,l}.
    pub fn basis_vector(basis: &Arc<Basis>, k: &[i64], l: &[u32]) -> Result<Self, BasisError> {
        let idx = basis.flat_index(k, l).ok_or(BasisError::IndexOutOfRange {
            k: k.to_vec(),
            l: l.to_vec(),
        })?;
        let mut s = Self::zero(basis);
        s.coeffs[idx] = Complex64::ONE;
        Ok(s)
    }

    /// Ground state scaled to the requested mass.
    pub fn ground(basis: &Arc<Basis>, mass: f64) -> Self {
        let mut s = Self::zero(basis);
        s.coeffs[basis
            .flat_index(&vec![0; basis.n_dim()], &vec![0; basis.n_dim()])
            .expect("ground mode always present")] = Complex64::new(mass, 0.0);
        s
    }

    /// Real-valued single mode: e_{0,l} for k = 0, otherwise the
    /// symmetrized combination (e_{k,l} + e_{-k,l}) / sqrt(2).
    pub fn single_mode(
        basis: &Arc<Basis>,
        k: &[i64],
        l: &[u32],
        amplitude: f64,
    ) -> Result<Self, BasisError> {
        let idx = basis.flat_index(k, l).ok_or(BasisError::IndexOutOfRange {
            k: k.to_vec(),
            l: l.to_vec(),
        })?;
        let mut s = Self::zero(basis);
        let conj = basis.conjugate_ordinal(idx);
        if conj == idx {
            s.coeffs[idx] = Complex64::new(amplitude, 0.0);
        } else {
            let a = Complex64::new(amplitude / std::f64::consts::SQRT_2, 0.0);
            s.coeffs[idx] = a;
            s.coeffs[conj] = a;
        }
        Ok(s)
    }

    /// Hermitian-symmetric random state with unit-norm fluctuation and
    /// prescribed mass on the ground mode. Deterministic in `seed`.
    pub fn random_mass(basis: &Arc<Basis>, seed: u64, mass: f64) -> Self {
        let mut s = Self::zero(basis);
        for ord in 0..basis.dim() {
            let conj = basis.conjugate_ordinal(ord);
            if conj < ord {
                continue; // filled by its partner
            }
            let re = rng::normal_at(seed, 0xbad5eed, 2 * ord as u64);
            if conj == ord {
                s.coeffs[ord] = Complex64::new(re, 0.0);
            } else {
                let im = rng::normal_at(seed, 0xbad5eed, 2 * ord as u64 + 1);
                let z = Complex64::new(re, im);
                s.coeffs[ord] = z;
                s.coeffs[conj] = z.conj();
            }
        }
        let ground = basis
            .flat_index(&vec![0; basis.n_dim()], &vec![0; basis.n_dim()])
            .unwrap();
        s.coeffs[ground] = Complex64::ZERO;
        let norm = s.norm_sq().sqrt();
        if norm > 0.0 {
            for c in &mut s.coeffs {
                *c /= norm;
            }
        }
        s.coeffs[ground] = Complex64::new(mass, 0.0);
        s
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<Complex64>) -> Result<Self, BasisError> {
        if coeffs.len() != basis.dim() {
            return Err(BasisError::BasisMismatch);
        }
        Ok(SpectralState {
            basis: basis.clone(),
            coeffs,
        })
    }

    pub fn coeff(&self, k: &[i64], l: &[u32]) -> Complex64 {
        self.basis
            .flat_index(k, l)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::ZERO)
    }

    /// Creation ladder on one axis; contributions raised above the
    /// truncation are dropped.
    pub fn apply_raise(&self, axis: usize) -> Self {
        let mut out = Self::zero(&self.basis);
        for ord in 0..self.coeffs.len() {
            let c = self.coeffs[ord];
            if c == Complex64::ZERO {
                continue;
            }
            if let Some(up) = self.basis.raised_ordinal(ord, axis) {
                let la = self.basis.hermite_degrees(ord)[axis] as f64;
                out.coeffs[up] += c * (la + 1.0).sqrt();
            }
        }
        out
    }

    /// Annihilation ladder on one axis; zero on `l_axis = 0` modes.
    pub fn apply_lower(&self, axis: usize) -> Self {
        let mut out = Self::zero(&self.basis);
        for ord in 0..self.coeffs.len() {
            let c = self.coeffs[ord];
            if c == Complex64::ZERO {
                continue;
            }
            if let Some(down) = self.basis.lowered_ordinal(ord, axis) {
                let la = self.basis.hermite_degrees(ord)[axis] as f64;
                out.coeffs[down] += c * la.sqrt();
            }
        }
        out
    }

    /// Spatial derivative along one axis: multiplies by 2πi k_axis.
    pub fn apply_grad_x(&self, axis: usize) -> Self {
        let mut out = self.clone();
        for ord in 0..out.coeffs.len() {
            let ka = out.basis.fourier_mode(ord)[axis] as f64;
            out.coeffs[ord] *= Complex64::new(0.0, TAU * ka);
        }
        out
    }

    /// Orthogonal projection onto `|k|_∞ <= k0`, `|l|_1 <= l0`.
    pub fn project(&self, k0: usize, l0: usize) -> Self {
        let mut out = self.clone();
        for ord in 0..out.coeffs.len() {
            let keep = out.basis.index(ord).fourier_sup() <= k0 as i64
                && out.basis.hermite_total(ord) <= l0 as u32;
            if !keep {
                out.coeffs[ord] = Complex64::ZERO;
            }
        }
        out
    }

    /// Sesquilinear inner product (conjugate on `self`).
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Conserved mass: the coefficient on the ground mode e_{0,0}.
    pub fn mass(&self) -> f64 {
        let n = self.basis.n_dim();
        self.coeff(&vec![0; n], &vec![0; n]).re
    }

    /// Largest violation of `d_{-k,l} = conj(d_{k,l})`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|ord| {
                let conj = self.basis.conjugate_ordinal(ord);
                (self.coeffs[ord] - self.coeffs[conj].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= a;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (c, o) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (c, o) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *c -= o;
        }
        out
    }

    /// Pointwise synthesis g(x, v). Real by construction for
    /// Hermitian-symmetric coefficients; we return the real part.
    pub fn evaluate(&self, x: &[f64], v: &[f64]) -> f64 {
        let n = self.basis.n_dim();
        assert_eq!(x.len(), n);
        assert_eq!(v.len(), n);
        let m_v = self.basis.truncation().m_v;
        // Per-axis Hermite function tables via the three-term recurrence.
        let tables: Vec<Vec<f64>> = v.iter().map(|&va| hermite_values(m_v, va)).collect();
        let mut acc = Complex64::ZERO;
        for ord in 0..self.coeffs.len() {
            let c = self.coeffs[ord];
            if c == Complex64::ZERO {
                continue;
            }
            let k = self.basis.fourier_mode(ord);
            let l = self.basis.hermite_degrees(ord);
            let phase: f64 = k
                .iter()
                .zip(x)
                .map(|(&ka, &xa)| TAU * ka as f64 * xa)
                .sum();
            let mut q = 1.0;
            for (a, &la) in l.iter().enumerate() {
                q *= tables[a][la as usize];
            }
            acc += c * Complex64::from_polar(q, phase);
        }
        acc.re
    }
}

/// Values q_0(v)..q_m(v) of the normalized Hermite functions at one
/// point, by the stable three-term recurrence
/// `q_{j+1} = (v q_j - sqrt(j) q_{j-1}) / sqrt(j+1)`.
pub fn hermite_values(max_degree: usize, v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    let q0 = (TAU).powf(-0.25) * (-v * v / 4.0).exp();
    out.push(q0);
    if max_degree >= 1 {
        out.push(v * q0);
    }
    for j in 1..max_degree {
        let next = (v * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
        out.push(next);
    }
    out
}
