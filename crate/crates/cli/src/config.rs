//! Declarative run configuration (TOML). Unknown keys are rejected;
//! the resolved configuration is echoed into every artifact together
//! with its hash, so runs are reproducible from their outputs alone.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use kinfp::basis::{Basis, SpectralState, TruncationSpec};
use kinfp::diagnostics::{DiagnosticsParams, FloorMode};
use kinfp::noise::{FieldSpec, NoiseSpec};
use kinfp::particle::LangevinScheme;
use kinfp::solver::{Scheme, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Ensemble,
    DecayFit,
    Invariant,
    Mixing,
    Validate,
    OracleCompare,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FieldCfg {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub value: Vec<f64>,
    #[serde(default)]
    pub mode: Vec<i64>,
    #[serde(default)]
    pub amplitude_re: Vec<f64>,
    #[serde(default)]
    pub amplitude_im: Vec<f64>,
}

impl FieldCfg {
    fn to_field(&self) -> Result<FieldSpec> {
        match self.kind.as_str() {
            "constant" => Ok(FieldSpec::constant(self.value.clone())),
            "fourier-mode" => {
                let amp: Vec<Complex64> = self
                    .amplitude_re
                    .iter()
                    .zip(
                        self.amplitude_im
                            .iter()
                            .chain(std::iter::repeat(&0.0)),
                    )
                    .map(|(&re, &im)| Complex64::new(re, im))
                    .collect();
                Ok(FieldSpec::fourier_mode(self.mode.clone(), amp))
            }
            other => bail!("unsupported field type `{other}` (constant | fourier-mode)"),
        }
    }
}

fn default_canonical_noise() -> Vec<FieldCfg> {
    Vec::new()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct NoiseCfg {
    /// empty list means canonical constant forcing (one unit field per
    /// axis, scaled to the admissibility bound)
    #[serde(default = "default_canonical_noise")]
    pub fields: Vec<FieldCfg>,
}

impl Default for NoiseCfg {
    fn default() -> Self {
        NoiseCfg {
            fields: default_canonical_noise(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SolverCfg {
    #[serde(default = "SolverCfg::default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "SolverCfg::default_dt")]
    pub dt: f64,
    #[serde(default = "SolverCfg::default_t_end")]
    pub t_end: f64,
    #[serde(default = "SolverCfg::default_diag_every")]
    pub diag_every: usize,
    /// 0 disables state snapshots
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "SolverCfg::default_stability_limit")]
    pub stability_limit: f64,
}

impl SolverCfg {
    fn default_scheme() -> Scheme {
        Scheme::ExponentialEulerIto
    }
    fn default_dt() -> f64 {
        1e-3
    }
    fn default_t_end() -> f64 {
        1.0
    }
    fn default_diag_every() -> usize {
        100
    }
    fn default_stability_limit() -> f64 {
        2.0
    }
}

impl Default for SolverCfg {
    fn default() -> Self {
        SolverCfg {
            scheme: Self::default_scheme(),
            dt: Self::default_dt(),
            t_end: Self::default_t_end(),
            diag_every: Self::default_diag_every(),
            snapshot_every: 0,
            stability_limit: Self::default_stability_limit(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EnsembleCfg {
    #[serde(default = "EnsembleCfg::default_size")]
    pub size: usize,
}

impl EnsembleCfg {
    fn default_size() -> usize {
        64
    }
}

impl Default for EnsembleCfg {
    fn default() -> Self {
        EnsembleCfg {
            size: Self::default_size(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModeCfg {
    pub k: Vec<i64>,
    pub l: Vec<u32>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct InitialCfg {
    /// ground | single-mode | random-mass
    #[serde(default = "InitialCfg::default_kind")]
    pub kind: String,
    #[serde(default = "InitialCfg::default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub k: Vec<i64>,
    #[serde(default)]
    pub l: Vec<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mass: f64,
    /// extra single modes added on top of the base state
    #[serde(default)]
    pub modes: Vec<ModeCfg>,
}

impl InitialCfg {
    fn default_kind() -> String {
        "ground".into()
    }
    fn default_amplitude() -> f64 {
        1.0
    }

    pub fn build(&self, basis: &Arc<Basis>) -> Result<SpectralState> {
        let mut state = match self.kind.as_str() {
            "ground" => SpectralState::ground(basis, self.amplitude),
            "single-mode" => {
                SpectralState::single_mode(basis, &self.k, &self.l, self.amplitude)
                    .context("initial single mode outside the truncation")?
            }
            "random-mass" => SpectralState::random_mass(basis, self.seed, self.mass),
            other => bail!("unknown initial state kind `{other}`"),
        };
        for m in &self.modes {
            state = state.add(
                &SpectralState::single_mode(basis, &m.k, &m.l, m.amplitude)
                    .context("additional mode outside the truncation")?,
            );
        }
        Ok(state)
    }
}

impl Default for InitialCfg {
    fn default() -> Self {
        InitialCfg {
            kind: Self::default_kind(),
            amplitude: Self::default_amplitude(),
            k: Vec::new(),
            l: Vec::new(),
            seed: 0,
            mass: 0.0,
            modes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DiagnosticsCfg {
    #[serde(default = "DiagnosticsCfg::d1")]
    pub alpha: f64,
    #[serde(default = "DiagnosticsCfg::d05")]
    pub beta: f64,
    #[serde(default = "DiagnosticsCfg::d05")]
    pub gamma: f64,
    #[serde(default = "DiagnosticsCfg::d1")]
    pub reg_a: f64,
    #[serde(default = "DiagnosticsCfg::d05")]
    pub reg_b: f64,
    #[serde(default = "DiagnosticsCfg::d05")]
    pub reg_c: f64,
}

impl DiagnosticsCfg {
    fn d1() -> f64 {
        1.0
    }
    fn d05() -> f64 {
        0.05
    }
    pub fn to_params(&self) -> DiagnosticsParams {
        DiagnosticsParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            reg_a: self.reg_a,
            reg_b: self.reg_b,
            reg_c: self.reg_c,
        }
    }
}

impl Default for DiagnosticsCfg {
    fn default() -> Self {
        DiagnosticsCfg {
            alpha: 1.0,
            beta: 0.05,
            gamma: 0.05,
            reg_a: 1.0,
            reg_b: 0.05,
            reg_c: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitCfg {
    /// capture scalar to fit: norm-sq | hypo-norm | f-func
    #[serde(default = "FitCfg::default_quantity")]
    pub quantity: String,
    #[serde(default = "FitCfg::default_window")]
    pub window: (f64, f64),
    /// zero | tail-mean
    #[serde(default = "FitCfg::default_floor")]
    pub floor: String,
}

impl FitCfg {
    fn default_quantity() -> String {
        "hypo-norm".into()
    }
    fn default_window() -> (f64, f64) {
        (1.0, 5.0)
    }
    fn default_floor() -> String {
        "tail-mean".into()
    }
    pub fn floor_mode(&self) -> Result<FloorMode> {
        match self.floor.as_str() {
            "zero" => Ok(FloorMode::Zero),
            "tail-mean" => Ok(FloorMode::TailMean),
            other => bail!("unknown floor mode `{other}` (zero | tail-mean)"),
        }
    }
}

impl Default for FitCfg {
    fn default() -> Self {
        FitCfg {
            quantity: Self::default_quantity(),
            window: Self::default_window(),
            floor: Self::default_floor(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct InvariantCfg {
    #[serde(default = "InvariantCfg::default_horizon")]
    pub horizon: f64,
    #[serde(default = "InvariantCfg::default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "InvariantCfg::default_clip")]
    pub clip: f64,
}

impl InvariantCfg {
    fn default_horizon() -> f64 {
        20.0
    }
    fn default_burn_in() -> f64 {
        1.0
    }
    fn default_clip() -> f64 {
        100.0
    }
}

impl Default for InvariantCfg {
    fn default() -> Self {
        InvariantCfg {
            horizon: Self::default_horizon(),
            burn_in: Self::default_burn_in(),
            clip: Self::default_clip(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ParticlesCfg {
    #[serde(default = "ParticlesCfg::default_count")]
    pub count: usize,
    #[serde(default)]
    pub hat_seed: u64,
    /// euler-maruyama | exponential-euler
    #[serde(default = "ParticlesCfg::default_scheme")]
    pub scheme: String,
}

impl ParticlesCfg {
    fn default_count() -> usize {
        10_000
    }
    fn default_scheme() -> String {
        "euler-maruyama".into()
    }
    pub fn langevin_scheme(&self) -> Result<LangevinScheme> {
        match self.scheme.as_str() {
            "euler-maruyama" => Ok(LangevinScheme::EulerMaruyama),
            "exponential-euler" => Ok(LangevinScheme::ExponentialEuler),
            other => bail!("unknown particle scheme `{other}`"),
        }
    }
}

impl Default for ParticlesCfg {
    fn default() -> Self {
        ParticlesCfg {
            count: Self::default_count(),
            hat_seed: 0,
            scheme: Self::default_scheme(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// optional; must agree with the subcommand when present
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default = "RunConfig::default_n_dim")]
    pub n_dim: usize,
    #[serde(default = "RunConfig::default_m_x")]
    pub m_x: usize,
    #[serde(default = "RunConfig::default_m_v")]
    pub m_v: usize,
    #[serde(default = "RunConfig::default_lambda")]
    pub lambda: f64,
    #[serde(default = "RunConfig::default_seed")]
    pub seed: u64,
    /// 0 = all available cores
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub override_lambda: bool,
    /// write the assembled operators in coordinate text format
    #[serde(default)]
    pub dump_operators: bool,
    #[serde(default)]
    pub noise: NoiseCfg,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default)]
    pub ensemble: EnsembleCfg,
    #[serde(default)]
    pub initial: InitialCfg,
    /// second initial state of the coupled mixing experiment
    #[serde(default)]
    pub mixing: InitialCfg,
    #[serde(default)]
    pub diagnostics: DiagnosticsCfg,
    #[serde(default)]
    pub fit: FitCfg,
    #[serde(default)]
    pub invariant: InvariantCfg,
    #[serde(default)]
    pub particles: ParticlesCfg,
}

impl RunConfig {
    fn default_n_dim() -> usize {
        1
    }
    fn default_m_x() -> usize {
        4
    }
    fn default_m_v() -> usize {
        8
    }
    fn default_lambda() -> f64 {
        0.3
    }
    fn default_seed() -> u64 {
        42
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text).context("malformed configuration")?;
        Ok(config)
    }

    pub fn truncation(&self) -> TruncationSpec {
        TruncationSpec::new(self.n_dim, self.m_x, self.m_v)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let spec = if self.noise.fields.is_empty() {
            NoiseSpec::canonical_constant(self.n_dim, self.lambda)
        } else {
            let fields: Result<Vec<FieldSpec>> =
                self.noise.fields.iter().map(|f| f.to_field()).collect();
            NoiseSpec::new(fields?, self.lambda)
        };
        spec.validate(self.n_dim)
            .context("hypothesis on the noise fields violated")?;
        Ok(spec)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            scheme: self.solver.scheme,
            dt: self.solver.dt,
            t_end: self.solver.t_end,
            lambda: self.lambda,
            diag_every: self.solver.diag_every.max(1),
            snapshot_every: match self.solver.snapshot_every {
                0 => None,
                n => Some(n),
            },
            stability_limit: self.solver.stability_limit,
            allow_large_lambda: self.override_lambda,
        }
    }

    /// Cross-field consistency beyond per-section parsing.
    pub fn validate(&self) -> Result<()> {
        if self.lambda >= 1.0 && !self.override_lambda {
            bail!(
                "lambda = {} >= 1: no bounded solution family (pass --override-lambda to force)",
                self.lambda
            );
        }
        if self.lambda < 0.0 {
            bail!("lambda must be nonnegative");
        }
        self.noise_spec()?;
        self.diagnostics
            .to_params()
            .validate()
            .context("diagnostics parameters")?;
        let basis = Basis::new(self.truncation())?;
        self.solver_config()
            .validate(basis.truncation())
            .context("solver configuration")?;
        Ok(())
    }
}
