//! Time integration of the truncated system
//! `dg = -A g dt + L g dt + λ B_j g ∘ dβ_j`.
//!
//! Three one-step maps are provided: explicit Euler-Maruyama on the
//! Itô form (conversion drift included), Heun predictor-corrector on
//! the Stratonovich form, and an exponential Euler variant that
//! applies the diagonal decay exp(L dt) exactly so the step size is
//! not restricted by the Fokker-Planck spectral radius.
//!
//! The ground-mode row of every assembled operator is structurally
//! empty, so the mass coefficient is conserved bit-exactly by all
//! schemes, pathwise.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::SpectralState;
use crate::diagnostics::{self, DiagnosticsParams, EnergyReport};
use crate::noise::BrownianPath;
use crate::operators::OperatorBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyamaIto,
    HeunStratonovich,
    ExponentialEulerIto,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dt must be positive (got {0})")]
    BadDt(f64),
    #[error("t_end must be nonnegative (got {0})")]
    BadHorizon(f64),
    #[error(
        "stability guard: dt·(m_v + 2π·m_x·sqrt(m_v)) = {value:.3} exceeds {limit}; \
         reduce dt or use the exponential scheme"
    )]
    UnstableDt { value: f64, limit: f64 },
    #[error("lambda = {0} >= 1 rejected (state bounds fail); set allow_large_lambda to override")]
    LambdaTooLarge(f64),
    #[error("path provides {available} steps, integration needs {needed}")]
    PathTooShort { available: usize, needed: usize },
    #[error("path carries {path} noise channels, bundle has {bundle}")]
    ChannelMismatch { path: usize, bundle: usize },
    #[error("non-finite state at step {step} (t = {time:.6}); integration aborted")]
    NonFinite {
        step: usize,
        time: f64,
        partial: Box<Trajectory>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub lambda: f64,
    /// steps between energy-report captures
    pub diag_every: usize,
    /// capture full states every this many steps (None: endpoints only
    /// when requested elsewhere)
    pub snapshot_every: Option<usize>,
    /// explicit-scheme guard on dt·(m_v + 2π m_x sqrt(m_v))
    pub stability_limit: f64,
    /// demonstration override for the lambda < 1 requirement
    pub allow_large_lambda: bool,
}

impl SolverConfig {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64, lambda: f64) -> Self {
        SolverConfig {
            scheme,
            dt,
            t_end,
            lambda,
            diag_every: 1,
            snapshot_every: None,
            stability_limit: 2.0,
            allow_large_lambda: false,
        }
    }

    pub fn with_diag_every(mut self, every: usize) -> Self {
        self.diag_every = every.max(1);
        self
    }

    pub fn with_snapshots(mut self, every: usize) -> Self {
        self.snapshot_every = Some(every.max(1));
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self, trunc: crate::basis::TruncationSpec) -> Result<(), SolverError> {
        if !(self.dt > 0.0) {
            return Err(SolverError::BadDt(self.dt));
        }
        if self.t_end < 0.0 {
            return Err(SolverError::BadHorizon(self.t_end));
        }
        if self.lambda >= 1.0 && !self.allow_large_lambda {
            return Err(SolverError::LambdaTooLarge(self.lambda));
        }
        let m_v = trunc.m_v as f64;
        let m_x = trunc.m_x as f64;
        let transport_scale = std::f64::consts::TAU * m_x * m_v.sqrt();
        let stiffness = match self.scheme {
            // exact diagonal decay: only the transport restricts dt
            Scheme::ExponentialEulerIto => transport_scale,
            _ => m_v + transport_scale,
        };
        let value = self.dt * stiffness;
        if value > self.stability_limit {
            return Err(SolverError::UnstableDt {
                value,
                limit: self.stability_limit,
            });
        }
        Ok(())
    }
}

/// Captured observables of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub reports: Vec<EnergyReport>,
    /// running Σ dt e^{-2Nλ²s} |Dg(s)|² at each capture (left endpoints)
    pub dissipation: Vec<f64>,
    /// sparse state snapshots (capture step, state)
    pub snapshots: Vec<(f64, SpectralState)>,
    pub final_state: SpectralState,
}

/// Scratch buffers reused across steps.
struct Workspace {
    drift: Vec<Complex64>,
    predictor: Vec<Complex64>,
    drift2: Vec<Complex64>,
    exp_diag: Vec<f64>,
}

impl Workspace {
    fn new(bundle: &OperatorBundle, dt: f64) -> Self {
        let dim = bundle.basis().dim();
        Workspace {
            drift: vec![Complex64::ZERO; dim],
            predictor: vec![Complex64::ZERO; dim],
            drift2: vec![Complex64::ZERO; dim],
            exp_diag: bundle.fp_diagonal().iter().map(|&d| (d * dt).exp()).collect(),
        }
    }
}

fn ito_drift(
    bundle: &OperatorBundle,
    lambda: f64,
    x: &[Complex64],
    out: &mut [Complex64],
    include_fp: bool,
) {
    out.fill(Complex64::ZERO);
    bundle
        .transport()
        .apply_add(Complex64::new(-1.0, 0.0), x, out);
    bundle
        .strat_correction()
        .apply_add(Complex64::new(lambda * lambda, 0.0), x, out);
    if include_fp {
        for ((o, xi), &d) in out.iter_mut().zip(x).zip(bundle.fp_diagonal()) {
            *o += xi * d;
        }
    }
}

fn strat_drift(bundle: &OperatorBundle, x: &[Complex64], out: &mut [Complex64]) {
    out.fill(Complex64::ZERO);
    bundle
        .transport()
        .apply_add(Complex64::new(-1.0, 0.0), x, out);
    for ((o, xi), &d) in out.iter_mut().zip(x).zip(bundle.fp_diagonal()) {
        *o += xi * d;
    }
}

fn add_noise(
    bundle: &OperatorBundle,
    lambda: f64,
    path: &BrownianPath,
    step: usize,
    scale: f64,
    x: &[Complex64],
    out: &mut [Complex64],
) {
    for (j, op) in bundle.noise_ops().iter().enumerate() {
        let amp = lambda * path.increment(j, step) * scale;
        if amp != 0.0 {
            op.apply_add(Complex64::new(amp, 0.0), x, out);
        }
    }
}

/// One explicit Euler-Maruyama step of the Itô form.
pub fn step_em_ito(
    state: &SpectralState,
    bundle: &OperatorBundle,
    path: &BrownianPath,
    step_index: usize,
    config: &SolverConfig,
) -> SpectralState {
    let mut ws = Workspace::new(bundle, config.dt);
    let mut out = state.clone();
    em_ito_inplace(out.coeffs_mut(), bundle, path, step_index, config, &mut ws);
    out
}

fn em_ito_inplace(
    x: &mut [Complex64],
    bundle: &OperatorBundle,
    path: &BrownianPath,
    step: usize,
    config: &SolverConfig,
    ws: &mut Workspace,
) {
    ito_drift(bundle, config.lambda, x, &mut ws.drift, true);
    let snapshot = ws.predictor.as_mut_slice();
    snapshot.copy_from_slice(x);
    for (xi, d) in x.iter_mut().zip(&ws.drift) {
        *xi += d * config.dt;
    }
    add_noise(bundle, config.lambda, path, step, 1.0, snapshot, x);
}

/// One Heun (midpoint predictor-corrector) step of the Stratonovich
/// form; no conversion drift.
pub fn step_heun_strat(
    state: &SpectralState,
    bundle: &OperatorBundle,
    path: &BrownianPath,
    step_index: usize,
    config: &SolverConfig,
) -> SpectralState {
    let mut ws = Workspace::new(bundle, config.dt);
    let mut out = state.clone();
    heun_inplace(out.coeffs_mut(), bundle, path, step_index, config, &mut ws);
    out
}

fn heun_inplace(
    x: &mut [Complex64],
    bundle: &OperatorBundle,
    path: &BrownianPath,
    step: usize,
    config: &SolverConfig,
    ws: &mut Workspace,
) {
    // predictor: x + dt f(x) + Σ_j λΔβ_j B_j x
    strat_drift(bundle, x, &mut ws.drift);
    ws.predictor.copy_from_slice(x);
    for (p, d) in ws.predictor.iter_mut().zip(&ws.drift) {
        *p += d * config.dt;
    }
    add_noise(bundle, config.lambda, path, step, 1.0, x, &mut ws.predictor);
    // corrector drift: f(x) + f(predictor)
    strat_drift(bundle, &ws.predictor, &mut ws.drift2);
    for (d2, d1) in ws.drift2.iter_mut().zip(&ws.drift) {
        *d2 += d1;
    }
    // corrector noise: Σ_j (λΔβ_j/2) B_j (x + predictor), accumulated
    // separately to avoid aliasing the input
    ws.drift.fill(Complex64::ZERO);
    add_noise(bundle, config.lambda, path, step, 0.5, x, &mut ws.drift);
    add_noise(
        bundle,
        config.lambda,
        path,
        step,
        0.5,
        &ws.predictor,
        &mut ws.drift,
    );
    for ((xi, d2), nz) in x.iter_mut().zip(&ws.drift2).zip(&ws.drift) {
        *xi += d2 * (0.5 * config.dt) + nz;
    }
}

/// One exponential Euler step: exact diagonal decay composed with an
/// Euler-Maruyama update of the remaining terms.
pub fn step_exponential_em(
    state: &SpectralState,
    bundle: &OperatorBundle,
    path: &BrownianPath,
    step_index: usize,
    config: &SolverConfig,
) -> SpectralState {
    let mut ws = Workspace::new(bundle, config.dt);
    let mut out = state.clone();
    exp_em_inplace(out.coeffs_mut(), bundle, path, step_index, config, &mut ws);
    out
}

fn exp_em_inplace(
    x: &mut [Complex64],
    bundle: &OperatorBundle,
    path: &BrownianPath,
    step: usize,
    config: &SolverConfig,
    ws: &mut Workspace,
) {
    ito_drift(bundle, config.lambda, x, &mut ws.drift, false);
    ws.predictor.copy_from_slice(x);
    for (xi, d) in x.iter_mut().zip(&ws.drift) {
        *xi += d * config.dt;
    }
    add_noise(bundle, config.lambda, path, step, 1.0, &ws.predictor, x);
    for (xi, &e) in x.iter_mut().zip(&ws.exp_diag) {
        *xi *= e;
    }
}

/// Reusable one-step integrator: owns the scratch buffers, advances
/// any state in place. Distinct steppers can drive coupled
/// trajectories on the same path.
pub struct Stepper<'a> {
    bundle: &'a OperatorBundle,
    config: SolverConfig,
    ws: Workspace,
}

impl<'a> Stepper<'a> {
    pub fn new(bundle: &'a OperatorBundle, config: &SolverConfig) -> Result<Self, SolverError> {
        config.validate(bundle.basis().truncation())?;
        Ok(Stepper {
            bundle,
            config: config.clone(),
            ws: Workspace::new(bundle, config.dt),
        })
    }

    pub fn step(&mut self, state: &mut SpectralState, path: &BrownianPath, step_index: usize) {
        match self.config.scheme {
            Scheme::EulerMaruyamaIto => em_ito_inplace(
                state.coeffs_mut(),
                self.bundle,
                path,
                step_index,
                &self.config,
                &mut self.ws,
            ),
            Scheme::HeunStratonovich => heun_inplace(
                state.coeffs_mut(),
                self.bundle,
                path,
                step_index,
                &self.config,
                &mut self.ws,
            ),
            Scheme::ExponentialEulerIto => exp_em_inplace(
                state.coeffs_mut(),
                self.bundle,
                path,
                step_index,
                &self.config,
                &mut self.ws,
            ),
        }
    }
}

/// Integrate from `g_in`, capturing energy reports every
/// `diag_every` steps (plus the initial and final times).
pub fn integrate(
    g_in: &SpectralState,
    bundle: &OperatorBundle,
    path: &BrownianPath,
    config: &SolverConfig,
    params: &DiagnosticsParams,
) -> Result<Trajectory, SolverError> {
    config.validate(bundle.basis().truncation())?;
    if path.n_fields() != bundle.noise_ops().len() {
        return Err(SolverError::ChannelMismatch {
            path: path.n_fields(),
            bundle: bundle.noise_ops().len(),
        });
    }
    let steps = config.steps();
    if path.steps() < steps {
        return Err(SolverError::PathTooShort {
            available: path.steps(),
            needed: steps,
        });
    }
    let mut ws = Workspace::new(bundle, config.dt);
    let mut state = g_in.clone();
    let n = bundle.basis().n_dim() as f64;
    let decay_rate = 2.0 * n * config.lambda * config.lambda;

    let mut traj = Trajectory {
        times: vec![0.0],
        reports: vec![diagnostics::report(&state, 0.0, params)],
        dissipation: vec![0.0],
        snapshots: Vec::new(),
        final_state: state.clone(),
    };
    if config.snapshot_every.is_some() {
        traj.snapshots.push((0.0, state.clone()));
    }

    let mut dissipation = 0.0;
    for step in 0..steps {
        let t_left = step as f64 * config.dt;
        // left-endpoint accumulation of the weighted dissipation
        let d_sq = weighted_d_sq(&state);
        dissipation += config.dt * (-decay_rate * t_left).exp() * d_sq;

        match config.scheme {
            Scheme::EulerMaruyamaIto => {
                em_ito_inplace(state.coeffs_mut(), bundle, path, step, config, &mut ws)
            }
            Scheme::HeunStratonovich => {
                heun_inplace(state.coeffs_mut(), bundle, path, step, config, &mut ws)
            }
            Scheme::ExponentialEulerIto => {
                exp_em_inplace(state.coeffs_mut(), bundle, path, step, config, &mut ws)
            }
        }

        let t = (step + 1) as f64 * config.dt;
        let capture = (step + 1) % config.diag_every == 0 || step + 1 == steps;
        if capture {
            let report = diagnostics::report(&state, t, params);
            if !report.norm_sq.is_finite() {
                traj.final_state = state.clone();
                return Err(SolverError::NonFinite {
                    step,
                    time: t,
                    partial: Box::new(traj),
                });
            }
            traj.times.push(t);
            traj.reports.push(report);
            traj.dissipation.push(dissipation);
        }
        if let Some(every) = config.snapshot_every {
            if (step + 1) % every == 0 || step + 1 == steps {
                traj.snapshots.push((t, state.clone()));
            }
        }
    }
    traj.final_state = state;
    Ok(traj)
}

fn weighted_d_sq(state: &SpectralState) -> f64 {
    let basis = state.basis();
    state
        .coeffs()
        .iter()
        .enumerate()
        .map(|(ord, c)| basis.hermite_total(ord) as f64 * c.norm_sqr())
        .sum()
}
