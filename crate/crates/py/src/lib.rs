//! Python bindings: the core types and operations behind a thin
//! wrapper layer.
//!
//! ```python
//! import kinfp_py as kf
//! trunc = kf.Truncation(1, 2, 8)
//! noise = kf.Noise.canonical(1, 0.3)
//! bundle = kf.Bundle(trunc, noise)
//! path = kf.Path.sample(1, seed=7, dt=1e-3, steps=1000)
//! g = kf.State.ground(trunc, 1.0)
//! out = kf.solve(g, bundle, path, "exponential-euler-ito", 1e-3, 1.0, 0.3, 100)
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kinfp::basis::{Basis, SpectralState, TruncationSpec};
use kinfp::diagnostics::DiagnosticsParams;
use kinfp::noise::{BrownianPath, FieldSpec, NoiseSpec};
use kinfp::operators::OperatorBundle;
use kinfp::particle::{self, LangevinConfig, LangevinScheme, OuState, ParticleEnsemble};
use kinfp::solver::{self, Scheme, SolverConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    match name {
        "euler-maruyama-ito" => Ok(Scheme::EulerMaruyamaIto),
        "heun-stratonovich" => Ok(Scheme::HeunStratonovich),
        "exponential-euler-ito" => Ok(Scheme::ExponentialEulerIto),
        other => Err(value_err(format!(
            "unknown scheme `{other}` (euler-maruyama-ito | heun-stratonovich | exponential-euler-ito)"
        ))),
    }
}

/// Truncated Fourier x Hermite basis.
#[pyclass(name = "Truncation", skip_from_py_object)]
#[derive(Clone)]
struct PyTruncation {
    basis: Arc<Basis>,
}

#[pymethods]
impl PyTruncation {
    #[new]
    fn new(n_dim: usize, m_x: usize, m_v: usize) -> PyResult<Self> {
        let basis = Basis::new(TruncationSpec::new(n_dim, m_x, m_v)).map_err(value_err)?;
        Ok(PyTruncation { basis })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    #[getter]
    fn n_dim(&self) -> usize {
        self.basis.n_dim()
    }

    /// Flattened index order as (k, l) pairs.
    fn index_manifest(&self) -> Vec<(Vec<i64>, Vec<u32>)> {
        (0..self.basis.dim())
            .map(|ord| {
                let idx = self.basis.index(ord);
                (idx.k, idx.l)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        let t = self.basis.truncation();
        format!(
            "Truncation(n_dim={}, m_x={}, m_v={}, dim={})",
            t.n_dim,
            t.m_x,
            t.m_v,
            self.basis.dim()
        )
    }
}

/// Coefficient vector of one truncated state.
#[pyclass(name = "State", skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: SpectralState,
}

#[pymethods]
impl PyState {
    #[staticmethod]
    fn ground(trunc: &PyTruncation, mass: f64) -> Self {
        PyState {
            inner: SpectralState::ground(&trunc.basis, mass),
        }
    }

    #[staticmethod]
    fn single_mode(trunc: &PyTruncation, k: Vec<i64>, l: Vec<u32>, amplitude: f64) -> PyResult<Self> {
        Ok(PyState {
            inner: SpectralState::single_mode(&trunc.basis, &k, &l, amplitude)
                .map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn random_mass(trunc: &PyTruncation, seed: u64, mass: f64) -> Self {
        PyState {
            inner: SpectralState::random_mass(&trunc.basis, seed, mass),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.inner.norm_sq()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn coeff(&self, k: Vec<i64>, l: Vec<u32>) -> (f64, f64) {
        let c = self.inner.coeff(&k, &l);
        (c.re, c.im)
    }

    /// All coefficients as (re, im) pairs in flattened order.
    fn coefficients(&self) -> Vec<(f64, f64)> {
        self.inner.coeffs().iter().map(|c| (c.re, c.im)).collect()
    }

    fn raised(&self, axis: usize) -> Self {
        PyState {
            inner: self.inner.apply_raise(axis),
        }
    }

    fn lowered(&self, axis: usize) -> Self {
        PyState {
            inner: self.inner.apply_lower(axis),
        }
    }

    fn grad_x(&self, axis: usize) -> Self {
        PyState {
            inner: self.inner.apply_grad_x(axis),
        }
    }

    fn project(&self, k0: usize, l0: usize) -> Self {
        PyState {
            inner: self.inner.project(k0, l0),
        }
    }

    fn add(&self, other: &PyState) -> Self {
        PyState {
            inner: self.inner.add(&other.inner),
        }
    }

    fn sub(&self, other: &PyState) -> Self {
        PyState {
            inner: self.inner.sub(&other.inner),
        }
    }

    fn scale(&self, re: f64, im: f64) -> Self {
        PyState {
            inner: self.inner.scale(Complex64::new(re, im)),
        }
    }

    fn inner_product(&self, other: &PyState) -> (f64, f64) {
        let c = self.inner.inner(&other.inner);
        (c.re, c.im)
    }

    fn evaluate(&self, x: Vec<f64>, v: Vec<f64>) -> f64 {
        self.inner.evaluate(&x, &v)
    }

    fn hermitian_defect(&self) -> f64 {
        self.inner.hermitian_defect()
    }
}

/// Forcing fields plus intensity.
#[pyclass(name = "Noise", skip_from_py_object)]
#[derive(Clone)]
struct PyNoise {
    inner: NoiseSpec,
}

#[pymethods]
impl PyNoise {
    /// Canonical constant forcing at the admissibility boundary.
    #[staticmethod]
    fn canonical(n_dim: usize, lambda: f64) -> Self {
        PyNoise {
            inner: NoiseSpec::canonical_constant(n_dim, lambda),
        }
    }

    #[staticmethod]
    fn constant(values: Vec<Vec<f64>>, lambda: f64) -> Self {
        PyNoise {
            inner: NoiseSpec::new(
                values.into_iter().map(FieldSpec::constant).collect(),
                lambda,
            ),
        }
    }

    #[staticmethod]
    fn fourier_mode(mode: Vec<i64>, amplitude_re: Vec<f64>, amplitude_im: Vec<f64>, lambda: f64) -> Self {
        let amp = amplitude_re
            .iter()
            .zip(&amplitude_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        PyNoise {
            inner: NoiseSpec::new(vec![FieldSpec::fourier_mode(mode, amp)], lambda),
        }
    }

    /// Exact admissibility sum; raises when the bound fails.
    fn validate(&self, n_dim: usize) -> PyResult<f64> {
        Ok(self.inner.validate(n_dim).map_err(value_err)?.sum)
    }

    #[getter]
    fn lambda(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn n_fields(&self) -> usize {
        self.inner.n_fields()
    }
}

/// Assembled evolution operators, immutable after construction.
#[pyclass(name = "Bundle")]
struct PyBundle {
    inner: OperatorBundle,
}

#[pymethods]
impl PyBundle {
    #[new]
    fn new(trunc: &PyTruncation, noise: &PyNoise) -> PyResult<Self> {
        noise
            .inner
            .validate(trunc.basis.n_dim())
            .map_err(value_err)?;
        Ok(PyBundle {
            inner: OperatorBundle::assemble(&trunc.basis, &noise.inner).map_err(value_err)?,
        })
    }

    /// Transport matrix entries as (row, col, re, im).
    fn transport_triplets(&self) -> Vec<(usize, usize, f64, f64)> {
        self.inner
            .transport()
            .triplets()
            .map(|(r, c, v)| (r, c, v.re, v.im))
            .collect()
    }

    fn fp_diagonal(&self) -> Vec<f64> {
        self.inner.fp_diagonal().to_vec()
    }
}

/// Shared Brownian increments.
#[pyclass(name = "Path", skip_from_py_object)]
#[derive(Clone)]
struct PyPath {
    inner: BrownianPath,
}

#[pymethods]
impl PyPath {
    #[staticmethod]
    fn sample(n_fields: usize, seed: u64, dt: f64, steps: usize) -> Self {
        PyPath {
            inner: BrownianPath::sample(n_fields, seed, dt, steps),
        }
    }

    fn refine(&self) -> Self {
        PyPath {
            inner: self.inner.refine(),
        }
    }

    fn coarsen(&self) -> PyResult<Self> {
        self.inner
            .coarsen()
            .map(|inner| PyPath { inner })
            .ok_or_else(|| value_err("already at the base resolution"))
    }

    fn increment(&self, field: usize, step: usize) -> f64 {
        self.inner.increment(field, step)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }
}

/// Integrate and return the capture series as a dict of lists, plus
/// the final state.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    g_in: &PyState,
    bundle: &PyBundle,
    path: &PyPath,
    scheme: &str,
    dt: f64,
    t_end: f64,
    lambda: f64,
    diag_every: usize,
) -> PyResult<(Py<pyo3::types::PyDict>, PyState)> {
    let config = SolverConfig::new(parse_scheme(scheme)?, dt, t_end, lambda)
        .with_diag_every(diag_every);
    let traj = solver::integrate(
        &g_in.inner,
        &bundle.inner,
        &path.inner,
        &config,
        &DiagnosticsParams::default(),
    )
    .map_err(runtime_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("t", traj.times.clone())?;
    macro_rules! column {
        ($name:literal, $f:expr) => {
            dict.set_item($name, traj.reports.iter().map($f).collect::<Vec<f64>>())?;
        };
    }
    column!("norm_sq", |r| r.norm_sq);
    column!("grad_x_sq", |r| r.grad_x_sq);
    column!("d_sq", |r| r.d_sq);
    column!("dstar_sq", |r| r.dstar_sq);
    column!("cross", |r| r.cross);
    column!("f_func", |r| r.f_func);
    column!("k_func", |r| r.k_func);
    column!("mass", |r| r.mass);
    column!("hypo_norm", |r| r.hypo_norm);
    dict.set_item("weighted_dissipation", traj.dissipation.clone())?;
    Ok((
        dict.unbind(),
        PyState {
            inner: traj.final_state,
        },
    ))
}

/// Closed-form covariance of the position/velocity fluctuation pair.
#[pyfunction]
fn q_covariance(t: f64) -> Vec<Vec<f64>> {
    particle::q_covariance(t)
        .iter()
        .map(|row| row.to_vec())
        .collect()
}

/// Stationary center draw (standard normal per component).
#[pyfunction]
fn ou_stationary(seed: u64, n_dim: usize) -> Vec<f64> {
    particle::ou_stationary_sample(seed, n_dim).v
}

/// Hermite expansion of the shifted-Maxwellian stationary profile;
/// returns the state and the truncated tail mass.
#[pyfunction]
fn fstat(lambda: f64, center: Vec<f64>, trunc: &PyTruncation) -> PyResult<(PyState, f64)> {
    let (state, tail) =
        particle::fstat_spectral(lambda, &OuState { v: center }, &trunc.basis)
            .map_err(value_err)?;
    Ok((PyState { inner: state }, tail))
}

/// Langevin particle run on a shared path; returns per-capture mean
/// velocities (list of per-axis lists).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn langevin_mean_velocity(
    noise: &PyNoise,
    path: &PyPath,
    count: usize,
    seed: u64,
    hat_seed: u64,
    lambda: f64,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = noise
        .inner
        .fields
        .first()
        .map(|f| f.n_dim())
        .unwrap_or(1);
    let mut ens = ParticleEnsemble::maxwellian(count, n, seed);
    let config = LangevinConfig {
        lambda,
        dt,
        scheme: LangevinScheme::EulerMaruyama,
        thermal_noise: true,
        hat_seed,
    };
    let traj = particle::simulate_langevin(
        &mut ens,
        &noise.inner.fields,
        &path.inner,
        &config,
        steps,
        record_every,
    )
    .map_err(runtime_err)?;
    Ok((traj.times, traj.mean_velocity))
}

/// Run the full identity/oracle suite; returns (name, passed, detail).
#[pyfunction]
fn validate_all() -> Vec<(String, bool, String)> {
    kinfp::validate::run_all()
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

#[pymodule]
fn kinfp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTruncation>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyNoise>()?;
    m.add_class::<PyBundle>()?;
    m.add_class::<PyPath>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(q_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(ou_stationary, m)?)?;
    m.add_function(wrap_pyfunction!(fstat, m)?)?;
    m.add_function(wrap_pyfunction!(langevin_mean_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(validate_all, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
