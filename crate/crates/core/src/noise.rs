//! Forcing fields and shared Brownian increments.
//!
//! The random force is `sum_j F_j(x) dβ_j(t)` with finitely many
//! fields. Two shapes are supported: constant vectors and single real
//! Fourier modes `F(x) = 2 Re(a e^{2πi k·x})`. Both have closed-form
//! sup norms, so the admissibility bound
//! `sum_j |F_j|_∞² + |∇_x F_j|_∞² <= 1` is checked exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("noise specification needs at least one field")]
    Empty,
    #[error("field {index}: dimension {got} does not match N = {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("noise bound violated: sum of squared sup norms = {sum:.6} > 1")]
    BoundExceeded { sum: f64 },
    #[error("noise intensity lambda must be nonnegative (got {0})")]
    NegativeLambda(f64),
}

/// One forcing field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FieldSpec {
    /// Spatially constant vector field.
    Constant { value: Vec<f64> },
    /// Real single-mode field `2 Re(amplitude · e^{2πi mode·x})`.
    FourierMode {
        mode: Vec<i64>,
        amplitude_re: Vec<f64>,
        amplitude_im: Vec<f64>,
    },
}

impl FieldSpec {
    pub fn constant(value: Vec<f64>) -> Self {
        FieldSpec::Constant { value }
    }

    pub fn fourier_mode(mode: Vec<i64>, amplitude: Vec<Complex64>) -> Self {
        FieldSpec::FourierMode {
            amplitude_re: amplitude.iter().map(|a| a.re).collect(),
            amplitude_im: amplitude.iter().map(|a| a.im).collect(),
            mode,
        }
    }

    pub fn n_dim(&self) -> usize {
        match self {
            FieldSpec::Constant { value } => value.len(),
            FieldSpec::FourierMode { amplitude_re, .. } => amplitude_re.len(),
        }
    }

    pub fn amplitude(&self) -> Vec<Complex64> {
        match self {
            FieldSpec::Constant { value } => {
                value.iter().map(|&v| Complex64::new(v, 0.0)).collect()
            }
            FieldSpec::FourierMode {
                amplitude_re,
                amplitude_im,
                ..
            } => amplitude_re
                .iter()
                .zip(amplitude_im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
        }
    }

    /// Closed-form `|F|_∞²` (Euclidean norm in the vector index).
    pub fn sup_norm_sq(&self) -> f64 {
        match self {
            FieldSpec::Constant { value } => value.iter().map(|v| v * v).sum(),
            _ => {
                let amp_sq: f64 = self.amplitude().iter().map(|a| a.norm_sqr()).sum();
                4.0 * amp_sq
            }
        }
    }

    /// Closed-form `|∇_x F|_∞²`; zero for constants.
    pub fn grad_sup_norm_sq(&self) -> f64 {
        match self {
            FieldSpec::Constant { .. } => 0.0,
            FieldSpec::FourierMode { mode, .. } => {
                let amp_sq: f64 = self.amplitude().iter().map(|a| a.norm_sqr()).sum();
                let k_sq: f64 = mode.iter().map(|&k| (k * k) as f64).sum();
                16.0 * std::f64::consts::PI * std::f64::consts::PI * k_sq * amp_sq
            }
        }
    }

    /// Evaluate the (real) field at a point of the torus.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FieldSpec::Constant { value } => value.clone(),
            FieldSpec::FourierMode { mode, .. } => {
                let phase: f64 = mode
                    .iter()
                    .zip(x)
                    .map(|(&k, &xa)| std::f64::consts::TAU * k as f64 * xa)
                    .sum();
                let rot = Complex64::from_polar(1.0, phase);
                self.amplitude().iter().map(|a| 2.0 * (a * rot).re).collect()
            }
        }
    }
}

/// The full noise description: fields plus intensity `lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub fields: Vec<FieldSpec>,
    pub lambda: f64,
}

/// Outcome of the admissibility check; `sum` is the computed bound.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseReport {
    pub sum: f64,
    pub per_field: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(fields: Vec<FieldSpec>, lambda: f64) -> Self {
        NoiseSpec { fields, lambda }
    }

    /// Canonical constant noise: one unit field per axis scaled so the
    /// admissibility sum is exactly one.
    pub fn canonical_constant(n_dim: usize, lambda: f64) -> Self {
        let scale = 1.0 / (n_dim as f64).sqrt();
        let fields = (0..n_dim)
            .map(|a| {
                let mut v = vec![0.0; n_dim];
                v[a] = scale;
                FieldSpec::constant(v)
            })
            .collect();
        NoiseSpec { fields, lambda }
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    /// Exact admissibility check; errors carry the offending sum.
    pub fn validate(&self, n_dim: usize) -> Result<NoiseReport, NoiseError> {
        if self.fields.is_empty() {
            return Err(NoiseError::Empty);
        }
        if self.lambda < 0.0 {
            return Err(NoiseError::NegativeLambda(self.lambda));
        }
        let mut per_field = Vec::with_capacity(self.fields.len());
        for (index, f) in self.fields.iter().enumerate() {
            if f.n_dim() != n_dim {
                return Err(NoiseError::DimensionMismatch {
                    index,
                    got: f.n_dim(),
                    expected: n_dim,
                });
            }
            per_field.push(f.sup_norm_sq() + f.grad_sup_norm_sq());
        }
        let sum = per_field.iter().sum();
        if sum > 1.0 + 1e-12 {
            return Err(NoiseError::BoundExceeded { sum });
        }
        Ok(NoiseReport { sum, per_field })
    }
}

/// Seeded Brownian increments shared by every consumer of one noise
/// realization. A path is identified by (seed, base step count, base
/// dt, refinement level); materialization is a pure function of that
/// identity, so `refine` followed by `coarsen` reproduces the parent
/// path bit-exactly.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    seed: u64,
    n_fields: usize,
    base_dt: f64,
    base_steps: usize,
    level: u32,
    /// increments[field][step]
    increments: Vec<Vec<f64>>,
}

/// Counter namespace separating bridge draws (level >= 1) from base
/// draws (level 0).
fn bridge_counter(level: u32, index: usize) -> u64 {
    ((level as u64) << 40) | index as u64
}

impl BrownianPath {
    /// Fresh path at the base resolution.
    pub fn sample(n_fields: usize, seed: u64, dt: f64, steps: usize) -> Self {
        assert!(dt > 0.0 && n_fields > 0);
        assert!(steps < 1 << 40, "step count out of the counter namespace");
        let sqrt_dt = dt.sqrt();
        let increments = (0..n_fields)
            .map(|j| {
                (0..steps)
                    .map(|i| sqrt_dt * rng::normal_at(seed, j as u64, i as u64))
                    .collect()
            })
            .collect();
        BrownianPath {
            seed,
            n_fields,
            base_dt: dt,
            base_steps: steps,
            level: 0,
            increments,
        }
    }

    pub fn n_fields(&self) -> usize {
        self.n_fields
    }

    pub fn dt(&self) -> f64 {
        self.base_dt / (1u64 << self.level) as f64
    }

    pub fn steps(&self) -> usize {
        self.base_steps << self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn increment(&self, field: usize, step: usize) -> f64 {
        self.increments[field][step]
    }

    pub fn increments(&self, field: usize) -> &[f64] {
        &self.increments[field]
    }

    /// Brownian-bridge midpoint refinement to dt/2. Coarse increments
    /// are split as (Δ/2 + w, Δ/2 - w) with w ~ N(0, dt/4).
    pub fn refine(&self) -> Self {
        let level = self.level + 1;
        let half_sd = 0.5 * self.dt().sqrt();
        let increments = self
            .increments
            .iter()
            .enumerate()
            .map(|(j, parent)| {
                let mut fine = Vec::with_capacity(parent.len() * 2);
                for (i, &delta) in parent.iter().enumerate() {
                    let w = half_sd
                        * rng::normal_at(self.seed, j as u64, bridge_counter(level, i));
                    fine.push(0.5 * delta + w);
                    fine.push(0.5 * delta - w);
                }
                fine
            })
            .collect();
        BrownianPath {
            seed: self.seed,
            n_fields: self.n_fields,
            base_dt: self.base_dt,
            base_steps: self.base_steps,
            level,
            increments,
        }
    }

    /// Inverse of `refine`: rematerializes the parent level from the
    /// path identity, hence exact.
    pub fn coarsen(&self) -> Option<Self> {
        if self.level == 0 {
            return None;
        }
        let mut path = BrownianPath::sample(self.n_fields, self.seed, self.base_dt, self.base_steps);
        for _ in 0..self.level - 1 {
            path = path.refine();
        }
        Some(path)
    }
}
