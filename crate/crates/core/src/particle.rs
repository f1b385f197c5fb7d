//! Langevin particle oracle.
//!
//! Independent validation channel for the spectral solver: particles
//! on the torus with velocities
//!
//! ```text
//!   dX = V dt
//!   dV = -V dt + λ Σ_j F_j(X) dβ_j + sqrt(2) dB̂
//! ```
//!
//! driven by the same Brownian increments `dβ_j` as the PDE (the force
//! sign is fixed so that the particle mean velocity and the spectral
//! first moment solve the same scalar equation pathwise), plus
//! independent per-particle thermal noise `B̂`. For constant canonical
//! forcing the model has an explicit stationary profile: a Maxwellian
//! whose center follows an Ornstein-Uhlenbeck process, which this
//! module samples exactly and expands in the Hermite basis.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::basis::{Basis, SpectralState};
use crate::noise::{BrownianPath, FieldSpec};
use crate::rng::{self, StreamRng};

#[derive(Debug, Error)]
pub enum ParticleError {
    #[error("empty particle ensemble")]
    Empty,
    #[error("lambda = {0} >= 1: stationary state not square-integrable")]
    LambdaTooLarge(f64),
    #[error("ensemble dimension {got} does not match {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("path has {got} channels, expected one per axis ({expected})")]
    ChannelMismatch { got: usize, expected: usize },
}

/// Positions on [0,1)^N and velocities in R^N, flattened row-major.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub n_dim: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl ParticleEnsemble {
    /// Uniform positions, Maxwellian (standard normal) velocities.
    pub fn maxwellian(count: usize, n_dim: usize, seed: u64) -> Self {
        let mut positions = Vec::with_capacity(count * n_dim);
        let mut velocities = Vec::with_capacity(count * n_dim);
        for p in 0..count {
            let mut r = StreamRng::new(seed, p as u64);
            for _ in 0..n_dim {
                positions.push(r.uniform());
                velocities.push(r.normal());
            }
        }
        ParticleEnsemble {
            n_dim,
            positions,
            velocities,
        }
    }

    pub fn count(&self) -> usize {
        self.positions.len() / self.n_dim
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_dim];
        for chunk in self.velocities.chunks(self.n_dim) {
            for (m, v) in mean.iter_mut().zip(chunk) {
                *m += v;
            }
        }
        let p = self.count() as f64;
        mean.iter_mut().for_each(|m| *m /= p);
        mean
    }

    pub fn velocity_second_moment(&self) -> Vec<f64> {
        let mut m2 = vec![0.0; self.n_dim];
        for chunk in self.velocities.chunks(self.n_dim) {
            for (m, v) in m2.iter_mut().zip(chunk) {
                *m += v * v;
            }
        }
        let p = self.count() as f64;
        m2.iter_mut().for_each(|m| *m /= p);
        m2
    }

    /// CSV rows `x_1..x_N,v_1..v_N`.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        let n = self.n_dim;
        let head: Vec<String> = (1..=n)
            .map(|a| format!("x{a}"))
            .chain((1..=n).map(|a| format!("v{a}")))
            .collect();
        writeln!(w, "{}", head.join(","))?;
        for p in 0..self.count() {
            let x = &self.positions[p * n..(p + 1) * n];
            let v = &self.velocities[p * n..(p + 1) * n];
            let row: Vec<String> = x.iter().chain(v).map(|z| format!("{z:.12e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LangevinScheme {
    /// v += (-v + force) dt pattern
    EulerMaruyama,
    /// exact friction decay e^{-dt}, then the kicks
    ExponentialEuler,
}

#[derive(Debug, Clone)]
pub struct LangevinConfig {
    pub lambda: f64,
    pub dt: f64,
    pub scheme: LangevinScheme,
    /// disable to integrate the deterministic skeleton (tests)
    pub thermal_noise: bool,
    /// seed of the per-particle thermal streams
    pub hat_seed: u64,
}

/// Summary series of one particle integration.
#[derive(Debug, Clone, Serialize)]
pub struct LangevinTrajectory {
    pub times: Vec<f64>,
    /// mean velocity per axis at each capture
    pub mean_velocity: Vec<Vec<f64>>,
    pub velocity_second_moment: Vec<Vec<f64>>,
}

/// Advance the ensemble `steps` steps, recording summary moments every
/// `record_every` steps. Pathwise deterministic given (path, config).
pub fn simulate_langevin(
    ensemble: &mut ParticleEnsemble,
    fields: &[FieldSpec],
    path: &BrownianPath,
    config: &LangevinConfig,
    steps: usize,
    record_every: usize,
) -> Result<LangevinTrajectory, ParticleError> {
    if ensemble.count() == 0 {
        return Err(ParticleError::Empty);
    }
    for f in fields {
        if f.n_dim() != ensemble.n_dim {
            return Err(ParticleError::DimensionMismatch {
                got: f.n_dim(),
                expected: ensemble.n_dim,
            });
        }
    }
    let n = ensemble.n_dim;
    let dt = config.dt;
    let sqrt_2dt = (2.0 * dt).sqrt();
    let decay = (-dt).exp();
    let record = record_every.max(1);

    let mut traj = LangevinTrajectory {
        times: vec![0.0],
        mean_velocity: vec![ensemble.mean_velocity()],
        velocity_second_moment: vec![ensemble.velocity_second_moment()],
    };

    // One thermal stream per particle, owned across the whole run.
    let count = ensemble.count();
    let mut rngs: Vec<Option<StreamRng>> = if config.thermal_noise {
        (0..count)
            .map(|p| Some(StreamRng::new(config.hat_seed, p as u64)))
            .collect()
    } else {
        (0..count).map(|_| None).collect()
    };

    let spatially_constant = fields
        .iter()
        .all(|f| matches!(f, FieldSpec::Constant { .. }));
    let constant_kick: Vec<Vec<f64>> = if spatially_constant {
        fields.iter().map(|f| f.evaluate(&vec![0.0; n])).collect()
    } else {
        Vec::new()
    };

    // Particles per parallel work item; moment sums are accumulated
    // chunkwise in the same pass and reduced in index order, keeping
    // the run bit-reproducible under any scheduling.
    const CHUNK: usize = 4096;
    let em = matches!(config.scheme, LangevinScheme::EulerMaruyama);

    for step in 0..steps {
        // Common force kick for constant fields: λ Σ_j F_j Δβ_j.
        let mut common = vec![0.0; n];
        if spatially_constant {
            for (j, f) in constant_kick.iter().enumerate() {
                let db = path.increment(j, step);
                for (c, fa) in common.iter_mut().zip(f) {
                    *c += config.lambda * fa * db;
                }
            }
        }
        let capture = (step + 1) % record == 0 || step + 1 == steps;

        let partials: Vec<(Vec<f64>, Vec<f64>)> = ensemble
            .positions
            .par_chunks_mut(n * CHUNK)
            .zip(ensemble.velocities.par_chunks_mut(n * CHUNK))
            .zip(rngs.par_chunks_mut(CHUNK))
            .map(|((xs, vs), rs)| {
                let mut sum_v = vec![0.0; n];
                let mut sum_v2 = vec![0.0; n];
                let mut kick = vec![0.0; n];
                for (p, rng) in rs.iter_mut().enumerate() {
                    let x = &mut xs[p * n..(p + 1) * n];
                    let v = &mut vs[p * n..(p + 1) * n];
                    kick.copy_from_slice(&common);
                    if !spatially_constant {
                        for (j, f) in fields.iter().enumerate() {
                            let db = path.increment(j, step);
                            for (k, fa) in kick.iter_mut().zip(f.evaluate(x)) {
                                *k += config.lambda * fa * db;
                            }
                        }
                    }
                    if let Some(r) = rng {
                        for k in kick.iter_mut() {
                            *k += sqrt_2dt * r.normal();
                        }
                    }
                    for a in 0..n {
                        x[a] = wrap_unit(x[a] + v[a] * dt);
                        v[a] = if em {
                            v[a] * (1.0 - dt) + kick[a]
                        } else {
                            v[a] * decay + kick[a]
                        };
                        if capture {
                            sum_v[a] += v[a];
                            sum_v2[a] += v[a] * v[a];
                        }
                    }
                }
                (sum_v, sum_v2)
            })
            .collect();

        if capture {
            let p = count as f64;
            let mut mean = vec![0.0; n];
            let mut m2 = vec![0.0; n];
            for (sv, sv2) in &partials {
                for a in 0..n {
                    mean[a] += sv[a];
                    m2[a] += sv2[a];
                }
            }
            mean.iter_mut().for_each(|m| *m /= p);
            m2.iter_mut().for_each(|m| *m /= p);
            traj.times.push((step + 1) as f64 * dt);
            traj.mean_velocity.push(mean);
            traj.velocity_second_moment.push(m2);
        }
    }
    Ok(traj)
}

/// Center process of the explicit stationary family.
#[derive(Debug, Clone, PartialEq)]
pub struct OuState {
    pub v: Vec<f64>,
}

/// Stream id reserved for stationary center draws.
const OU_STREAM: u64 = 0x0a5e;

/// Stationary draw: standard normal per component.
pub fn ou_stationary_sample(seed: u64, n_dim: usize) -> OuState {
    OuState {
        v: (0..n_dim)
            .map(|a| rng::normal_at(seed, OU_STREAM, a as u64))
            .collect(),
    }
}

/// Discretization of dV = -V dt + sqrt(2) dβ on the shared path; the
/// variants mirror the PDE schemes so coupled tests can match orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuScheme {
    /// v <- e^{-dt} (v + sqrt(2) Δβ)
    ExactDecay,
    /// v <- v(1 - dt) + sqrt(2) Δβ
    EulerMaruyama,
    /// midpoint predictor-corrector, matching the Heun PDE step
    Heun,
}

/// Evolve the center process along `steps` increments of the shared
/// path starting at `start_step`. Requires one path channel per axis
/// (canonical constant forcing).
pub fn ou_evolve(
    state: &OuState,
    path: &BrownianPath,
    start_step: usize,
    steps: usize,
    dt: f64,
    scheme: OuScheme,
) -> Result<OuState, ParticleError> {
    let n = state.v.len();
    if path.n_fields() != n {
        return Err(ParticleError::ChannelMismatch {
            got: path.n_fields(),
            expected: n,
        });
    }
    let mut v = state.v.clone();
    let sqrt2 = std::f64::consts::SQRT_2;
    for s in start_step..start_step + steps {
        for (a, va) in v.iter_mut().enumerate() {
            let db = sqrt2 * path.increment(a, s);
            *va = match scheme {
                OuScheme::ExactDecay => (-dt).exp() * (*va + db),
                OuScheme::EulerMaruyama => *va * (1.0 - dt) + db,
                OuScheme::Heun => {
                    let pred = *va * (1.0 - dt) + db;
                    *va + 0.5 * dt * (-*va - pred) + db
                }
            };
        }
    }
    Ok(OuState { v })
}

/// Closed-form covariance of the (position, velocity) fluctuation pair
/// per axis after time t:
///
/// ```text
///   Q(t) = 2 [ ∫(1-e^{-s})² ds   ∫e^{-s}(1-e^{-s}) ds ]
///            [        ·                ∫e^{-2s} ds     ]
/// ```
pub fn q_covariance(t: f64) -> [[f64; 2]; 2] {
    let em = (-t).exp();
    let em2 = (-2.0 * t).exp();
    let q11 = 2.0 * (t - 2.0 * (1.0 - em) + 0.5 * (1.0 - em2));
    let q12 = 2.0 * ((1.0 - em) - 0.5 * (1.0 - em2));
    let q22 = 1.0 - em2;
    [[q11, q12], [q12, q22]]
}

/// Hermite expansion of the shifted-Maxwellian stationary profile with
/// center `(λ/√2) V`: coefficients `Π_a shift_a^{l_a} / sqrt(l_a!)` on
/// the spatially homogeneous modes. Returns the state and the Hermite
/// tail mass dropped by the truncation (exact total is e^{|shift|²}).
pub fn fstat_spectral(
    lambda: f64,
    v: &OuState,
    basis: &Arc<Basis>,
) -> Result<(SpectralState, f64), ParticleError> {
    if lambda >= 1.0 {
        return Err(ParticleError::LambdaTooLarge(lambda));
    }
    let n = basis.n_dim();
    if v.v.len() != n {
        return Err(ParticleError::DimensionMismatch {
            got: v.v.len(),
            expected: n,
        });
    }
    let shift: Vec<f64> = v.v.iter().map(|&x| lambda / std::f64::consts::SQRT_2 * x).collect();
    let m_v = basis.truncation().m_v;
    // Per-axis coefficient tables by the recurrence c_{j+1} = c_j a/sqrt(j+1).
    let tables: Vec<Vec<f64>> = shift
        .iter()
        .map(|&a| {
            let mut t = Vec::with_capacity(m_v + 1);
            t.push(1.0);
            for j in 0..m_v {
                let last = *t.last().unwrap();
                t.push(last * a / ((j + 1) as f64).sqrt());
            }
            t
        })
        .collect();
    let mut state = SpectralState::zero(basis);
    let k0 = vec![0i64; n];
    // Hermite ordinals are contiguous within one Fourier block; walk
    // the k = 0 block directly.
    let base = basis.flat_index(&k0, &vec![0; n]).unwrap();
    let mut captured = 0.0;
    for h in 0..basis.hermite_count() {
        let ord = base + h;
        let mut c = 1.0;
        for (a, &la) in basis.hermite_degrees(ord).iter().enumerate() {
            c *= tables[a][la as usize];
        }
        state.coeffs_mut()[ord] = num_complex::Complex64::new(c, 0.0);
        captured += c * c;
    }
    let shift_sq: f64 = shift.iter().map(|a| a * a).sum();
    let tail = (shift_sq.exp() - captured).max(0.0);
    Ok((state, tail))
}

/// First and second velocity moments, spectral vs particle averages.
#[derive(Debug, Clone, Serialize)]
pub struct MomentDiscrepancy {
    pub mass_delta: f64,
    pub mean_velocity_delta: Vec<f64>,
    pub second_moment_delta: Vec<f64>,
}

pub fn compare_moments(
    pde_state: &SpectralState,
    particles: &ParticleEnsemble,
) -> Result<MomentDiscrepancy, ParticleError> {
    if particles.count() == 0 {
        return Err(ParticleError::Empty);
    }
    let basis = pde_state.basis();
    let n = basis.n_dim();
    if particles.n_dim != n {
        return Err(ParticleError::DimensionMismatch {
            got: particles.n_dim,
            expected: n,
        });
    }
    let k0 = vec![0i64; n];
    let mean_p = particles.mean_velocity();
    let m2_p = particles.velocity_second_moment();
    let mass = pde_state.mass();
    let mut mean_delta = Vec::with_capacity(n);
    let mut m2_delta = Vec::with_capacity(n);
    for a in 0..n {
        let mut e1 = vec![0u32; n];
        e1[a] = 1;
        let u = pde_state.coeff(&k0, &e1).re;
        mean_delta.push((u - mean_p[a]).abs());
        let mut e2 = vec![0u32; n];
        e2[a] = 2;
        let m2 = mass + std::f64::consts::SQRT_2 * pde_state.coeff(&k0, &e2).re;
        m2_delta.push((m2 - m2_p[a]).abs());
    }
    Ok(MomentDiscrepancy {
        mass_delta: (mass - 1.0).abs(),
        mean_velocity_delta: mean_delta,
        second_moment_delta: m2_delta,
    })
}
