//! Monte Carlo over noise realizations: mean/standard-error series,
//! time-averaged invariant-measure summaries, and the coupled
//! two-trajectory contraction experiment.
//!
//! Realization `i` derives its path seed from `(base_seed, i)`;
//! realizations run independently (in parallel) and all reductions are
//! pairwise sums over the index-ordered results, so statistics are
//! reproducible bit-for-bit regardless of scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::SpectralState;
use crate::diagnostics::{self, DiagnosticsParams, EnergyReport};
use crate::noise::BrownianPath;
use crate::operators::OperatorBundle;
use crate::rng;
use crate::solver::{self, SolverConfig, SolverError, Stepper};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble size must be at least 2 (got {0})")]
    TooSmall(usize),
    #[error("initial state has mass {got:.6}, configured mass is {expected:.6}")]
    MassMismatch { got: f64, expected: f64 },
    #[error("coupled initial states differ in mass by {0:.3e}; difference must carry zero mass")]
    CoupledMassMismatch(f64),
    #[error("all {0} realizations aborted")]
    AllAborted(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Fit(#[from] crate::diagnostics::DiagnosticsError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub size: usize,
    pub base_seed: u64,
    pub solver: SolverConfig,
    /// prescribed mass of the initial state
    pub mass: f64,
}

impl EnsembleConfig {
    pub fn validate(&self, g_in: &SpectralState) -> Result<(), EnsembleError> {
        if self.size < 2 {
            return Err(EnsembleError::TooSmall(self.size));
        }
        if (g_in.mass() - self.mass).abs() > 1e-10 {
            return Err(EnsembleError::MassMismatch {
                got: g_in.mass(),
                expected: self.mass,
            });
        }
        Ok(())
    }
}

/// Pairwise (cascade) sum: deterministic and accurate.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean and standard error of the mean across realizations.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

fn stats_over(series: &[Vec<f64>]) -> ScalarStats {
    let m = series.len() as f64;
    let len = series[0].len();
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    let mut column = vec![0.0; series.len()];
    for t in 0..len {
        for (c, s) in column.iter_mut().zip(series) {
            *c = s[t];
        }
        let mu = pairwise_sum(&column) / m;
        let sq: Vec<f64> = column.iter().map(|v| (v - mu) * (v - mu)).collect();
        let var = if series.len() > 1 {
            pairwise_sum(&sq) / (m - 1.0)
        } else {
            0.0
        };
        mean.push(mu);
        stderr.push((var / m).sqrt());
    }
    ScalarStats { mean, stderr }
}

/// Per-realization capture series kept by the ensemble result.
#[derive(Debug, Clone)]
pub struct RealizationSeries {
    pub reports: Vec<EnergyReport>,
    pub dissipation: Vec<f64>,
    /// populated when the solver config requests snapshots
    pub snapshots: Vec<(f64, SpectralState)>,
}

#[derive(Debug)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub realizations: Vec<RealizationSeries>,
    /// (realization index, abort description)
    pub aborted: Vec<(usize, String)>,
}

impl EnsembleResult {
    pub fn scalar_stats(&self, f: impl Fn(&EnergyReport) -> f64) -> ScalarStats {
        let series: Vec<Vec<f64>> = self
            .realizations
            .iter()
            .map(|r| r.reports.iter().map(&f).collect())
            .collect();
        stats_over(&series)
    }

    pub fn dissipation_stats(&self) -> ScalarStats {
        let series: Vec<Vec<f64>> = self
            .realizations
            .iter()
            .map(|r| r.dissipation.clone())
            .collect();
        stats_over(&series)
    }

    /// Ensemble-mean first/second-order functionals at each snapshot
    /// time; empty unless the solver captured snapshots.
    pub fn snapshot_functionals(&self) -> Vec<crate::diagnostics::EnsembleFunctionals> {
        let n_caps = self
            .realizations
            .iter()
            .map(|r| r.snapshots.len())
            .min()
            .unwrap_or(0);
        (0..n_caps)
            .map(|ci| {
                let t = self.realizations[0].snapshots[ci].0;
                let states: Vec<SpectralState> = self
                    .realizations
                    .iter()
                    .map(|r| r.snapshots[ci].1.clone())
                    .collect();
                crate::diagnostics::ensemble_functionals(&states, t)
            })
            .collect()
    }
}

fn path_for(config: &EnsembleConfig, n_fields: usize, index: usize) -> BrownianPath {
    BrownianPath::sample(
        n_fields,
        rng::derive_seed(config.base_seed, index as u64),
        config.solver.dt,
        config.solver.steps(),
    )
}

/// Run `size` independent realizations from the same initial state.
pub fn run_ensemble(
    bundle: &OperatorBundle,
    g_in: &SpectralState,
    config: &EnsembleConfig,
    params: &DiagnosticsParams,
) -> Result<EnsembleResult, EnsembleError> {
    config.validate(g_in)?;
    config.solver.validate(bundle.basis().truncation())?;
    let n_fields = bundle.noise_ops().len();
    let runs: Vec<Result<solver::Trajectory, SolverError>> = (0..config.size)
        .into_par_iter()
        .map(|i| {
            let path = path_for(config, n_fields, i);
            solver::integrate(g_in, bundle, &path, &config.solver, params)
        })
        .collect();

    let mut times = Vec::new();
    let mut realizations = Vec::new();
    let mut aborted = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(traj) => {
                if times.is_empty() {
                    times = traj.times.clone();
                }
                realizations.push(RealizationSeries {
                    reports: traj.reports,
                    dissipation: traj.dissipation,
                    snapshots: traj.snapshots,
                });
            }
            Err(e) => aborted.push((i, e.to_string())),
        }
    }
    if realizations.is_empty() {
        return Err(EnsembleError::AllAborted(config.size));
    }
    Ok(EnsembleResult {
        times,
        realizations,
        aborted,
    })
}

/// Lipschitz test functionals summarizing the time-averaged law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TestFunctional {
    /// |g|² (not Lipschitz; used for closed-form cross-checks)
    NormSq,
    /// min(|g|, r)
    ClippedNorm { r: f64 },
    /// min(sqrt(|g|²_{∇,D}), r)
    ClippedHypoNorm { r: f64 },
    /// Re d_{k,l}
    SpectralMomentRe { k: Vec<i64>, l: Vec<u32> },
}

impl TestFunctional {
    pub fn name(&self) -> String {
        match self {
            TestFunctional::NormSq => "norm_sq".into(),
            TestFunctional::ClippedNorm { r } => format!("clipped_norm_{r}"),
            TestFunctional::ClippedHypoNorm { r } => format!("clipped_hypo_norm_{r}"),
            TestFunctional::SpectralMomentRe { k, l } => format!("re_d_{k:?}_{l:?}"),
        }
    }

    pub fn evaluate(&self, state: &SpectralState) -> f64 {
        match self {
            TestFunctional::NormSq => state.norm_sq(),
            TestFunctional::ClippedNorm { r } => state.norm_sq().sqrt().min(*r),
            TestFunctional::ClippedHypoNorm { r } => {
                let rep = diagnostics::report(state, 0.0, &DiagnosticsParams::default());
                rep.hypo_norm.sqrt().min(*r)
            }
            TestFunctional::SpectralMomentRe { k, l } => state.coeff(k, l).re,
        }
    }

    /// Default family: clipped norm, low spectral moments, clipped
    /// hypocoercive norm.
    pub fn default_family(n_dim: usize, clip: f64) -> Vec<TestFunctional> {
        let mut fam = vec![
            TestFunctional::ClippedNorm { r: clip },
            TestFunctional::ClippedHypoNorm { r: clip },
        ];
        if n_dim == 1 {
            for k in 0..=2i64 {
                for l in 0..=2u32 {
                    fam.push(TestFunctional::SpectralMomentRe {
                        k: vec![k],
                        l: vec![l],
                    });
                }
            }
        }
        fam
    }
}

/// Cesàro time averages of the test functionals over [burn_in,
/// burn_in + horizon], pooled over realizations. The standard error is
/// the between-realization spread of per-realization time averages.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureEstimate {
    pub t_span: (f64, f64),
    pub snapshot_count: usize,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

pub fn estimate_invariant(
    bundle: &OperatorBundle,
    g_in: &SpectralState,
    config: &EnsembleConfig,
    functionals: &[TestFunctional],
    burn_in: f64,
) -> Result<MeasureEstimate, EnsembleError> {
    config.validate(g_in)?;
    let mut solver_cfg = config.solver.clone();
    let snap_every = solver_cfg.snapshot_every.unwrap_or(solver_cfg.diag_every);
    solver_cfg.snapshot_every = Some(snap_every);
    let n_fields = bundle.noise_ops().len();
    let params = DiagnosticsParams::default();

    // Per realization: vector of per-functional time averages.
    let per_real: Vec<Result<Vec<Vec<f64>>, SolverError>> = (0..config.size)
        .into_par_iter()
        .map(|i| {
            let path = path_for(config, n_fields, i);
            let traj = solver::integrate(g_in, bundle, &path, &solver_cfg, &params)?;
            let values: Vec<Vec<f64>> = traj
                .snapshots
                .iter()
                .filter(|(t, _)| *t >= burn_in - 1e-12)
                .map(|(_, s)| functionals.iter().map(|f| f.evaluate(s)).collect())
                .collect();
            Ok(values)
        })
        .collect();

    let mut kept: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut aborted = 0usize;
    for r in per_real {
        match r {
            Ok(v) => kept.push(v),
            Err(_) => aborted += 1,
        }
    }
    if kept.is_empty() {
        return Err(EnsembleError::AllAborted(aborted));
    }

    let nf = functionals.len();
    let snapshot_count: usize = kept.iter().map(|v| v.len()).sum();
    // Time average per realization, then across realizations.
    let real_means: Vec<Vec<f64>> = kept
        .iter()
        .map(|snaps| {
            (0..nf)
                .map(|f| {
                    let col: Vec<f64> = snaps.iter().map(|row| row[f]).collect();
                    pairwise_sum(&col) / col.len() as f64
                })
                .collect()
        })
        .collect();
    let m = real_means.len() as f64;
    let mean: Vec<f64> = (0..nf)
        .map(|f| {
            let col: Vec<f64> = real_means.iter().map(|r| r[f]).collect();
            pairwise_sum(&col) / m
        })
        .collect();
    let stderr: Vec<f64> = (0..nf)
        .map(|f| {
            let col: Vec<f64> = real_means.iter().map(|r| (r[f] - mean[f]).powi(2)).collect();
            (pairwise_sum(&col) / (m - 1.0) / m).sqrt()
        })
        .collect();
    // Pooled covariance over all snapshots (law summary, not an error bar).
    let mut covariance = vec![vec![0.0; nf]; nf];
    for snaps in &kept {
        for row in snaps {
            for i in 0..nf {
                for j in 0..nf {
                    covariance[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
    }
    let denom = (snapshot_count.max(2) - 1) as f64;
    for row in &mut covariance {
        for v in row {
            *v /= denom;
        }
    }

    Ok(MeasureEstimate {
        t_span: (burn_in, config.solver.t_end),
        snapshot_count,
        names: functionals.iter().map(|f| f.name()).collect(),
        mean,
        stderr,
        covariance,
    })
}

/// Coupled-trajectory contraction: both initial states driven by the
/// identical path in each realization; returns the capture series of
/// E|g1 - g2|² with its decay fit.
#[derive(Debug, Clone, Serialize)]
pub struct MixingResult {
    pub times: Vec<f64>,
    pub mean_diff_sq: Vec<f64>,
    pub stderr_diff_sq: Vec<f64>,
    pub fit: crate::diagnostics::DecayFit,
}

pub fn mixing_experiment(
    bundle: &OperatorBundle,
    g_in_1: &SpectralState,
    g_in_2: &SpectralState,
    config: &EnsembleConfig,
    fit_window: (f64, f64),
) -> Result<MixingResult, EnsembleError> {
    let mass_gap = (g_in_1.mass() - g_in_2.mass()).abs();
    if mass_gap > 1e-10 {
        return Err(EnsembleError::CoupledMassMismatch(mass_gap));
    }
    if config.size < 2 {
        return Err(EnsembleError::TooSmall(config.size));
    }
    config.solver.validate(bundle.basis().truncation())?;
    let n_fields = bundle.noise_ops().len();
    let steps = config.solver.steps();
    let every = config.solver.diag_every.max(1);

    let series: Vec<(Vec<f64>, Vec<f64>)> = (0..config.size)
        .into_par_iter()
        .map(|i| {
            let path = path_for(config, n_fields, i);
            let mut s1 = g_in_1.clone();
            let mut s2 = g_in_2.clone();
            let mut stepper1 = Stepper::new(bundle, &config.solver).expect("validated above");
            let mut stepper2 = Stepper::new(bundle, &config.solver).expect("validated above");
            let mut times = vec![0.0];
            let mut diff = vec![s1.sub(&s2).norm_sq()];
            for step in 0..steps {
                stepper1.step(&mut s1, &path, step);
                stepper2.step(&mut s2, &path, step);
                if (step + 1) % every == 0 || step + 1 == steps {
                    times.push((step + 1) as f64 * config.solver.dt);
                    diff.push(s1.sub(&s2).norm_sq());
                }
            }
            (times, diff)
        })
        .collect();

    let times = series[0].0.clone();
    let diff_series: Vec<Vec<f64>> = series.into_iter().map(|(_, d)| d).collect();
    let stats = stats_over(&diff_series);
    let fit = diagnostics::fit_decay(
        &times,
        &stats.mean,
        fit_window,
        diagnostics::FloorMode::Zero,
    )?;
    Ok(MixingResult {
        times,
        mean_diff_sq: stats.mean,
        stderr_diff_sq: stats.stderr,
        fit,
    })
}
