//! Experiment execution and artifact emission. Every file starts with
//! a provenance block: schema tag, seed, config hash and the full
//! resolved configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use kinfp::basis::Basis;
use kinfp::diagnostics;
use kinfp::ensemble::{self, EnsembleConfig, TestFunctional};
use kinfp::noise::BrownianPath;
use kinfp::operators::OperatorBundle;
use kinfp::particle::{self, LangevinConfig, ParticleEnsemble};
use kinfp::rng;
use kinfp::solver::{self, Stepper};
use kinfp::validate;

use crate::config::{Experiment, RunConfig};

pub struct Runner {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub echo: String,
    pub hash: String,
}

impl Runner {
    pub fn new(config: RunConfig, out_dir: PathBuf) -> Result<Self> {
        config.validate()?;
        let echo = toml::to_string_pretty(&config).context("serializing config echo")?;
        let mut hasher = Sha256::new();
        hasher.update(echo.as_bytes());
        let hash = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Runner {
            config,
            out_dir,
            echo,
            hash,
        })
    }

    fn provenance_comment(&self, schema: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("# schema = {schema}\n"));
        out.push_str(&format!("# config_sha256 = {}\n", self.hash));
        out.push_str(&format!("# seed = {}\n", self.config.seed));
        for line in self.echo.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    fn write_text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            schema: &'a str,
            config_sha256: &'a str,
            seed: u64,
            config: &'a RunConfig,
            #[serde(flatten)]
            payload: &'a T,
        }
        let body = serde_json::to_string_pretty(&Envelope {
            schema: name.trim_end_matches(".json"),
            config_sha256: &self.hash,
            seed: self.config.seed,
            config: &self.config,
            payload,
        })?;
        self.write_text(name, &body)
    }

    fn setup(&self) -> Result<(Arc<Basis>, OperatorBundle)> {
        let basis = Basis::new(self.config.truncation())?;
        let noise = self.config.noise_spec()?;
        let bundle = OperatorBundle::assemble(&basis, &noise)?;
        Ok((basis, bundle))
    }

    fn ensemble_config(&self, mass: f64) -> EnsembleConfig {
        EnsembleConfig {
            size: self.config.ensemble.size,
            base_seed: self.config.seed,
            solver: self.config.solver_config(),
            mass,
        }
    }

    pub fn run(&self, experiment: Experiment) -> Result<()> {
        if let Some(declared) = self.config.experiment {
            if declared != experiment {
                bail!(
                    "config declares experiment {declared:?} but the {experiment:?} subcommand was invoked"
                );
            }
        }
        match experiment {
            Experiment::Simulate => self.simulate(),
            Experiment::Ensemble => self.ensemble(),
            Experiment::DecayFit => self.decay_fit(),
            Experiment::Invariant => self.invariant(),
            Experiment::Mixing => self.mixing(),
            Experiment::Validate => self.validate_suite(),
            Experiment::OracleCompare => self.oracle_compare(),
        }
    }

    fn reports_csv(&self, traj: &solver::Trajectory) -> String {
        let mut csv = self.provenance_comment("kinfp-reports-v1");
        csv.push_str(diagnostics::EnergyReport::CSV_HEADER);
        csv.push_str(",weighted_dissipation\n");
        for (r, d) in traj.reports.iter().zip(&traj.dissipation) {
            csv.push_str(&r.csv_row());
            csv.push_str(&format!(",{d:.12e}\n"));
        }
        csv
    }

    fn simulate(&self) -> Result<()> {
        let (basis, bundle) = self.setup()?;
        if self.config.dump_operators {
            for (name, matrix) in [
                ("transport.coo", bundle.transport()),
                ("strat_correction.coo", bundle.strat_correction()),
            ] {
                let mut buf = Vec::new();
                OperatorBundle::dump_coordinate(matrix, &mut buf)?;
                self.write_text(name, &String::from_utf8_lossy(&buf))?;
            }
            for (j, op) in bundle.noise_ops().iter().enumerate() {
                let mut buf = Vec::new();
                OperatorBundle::dump_coordinate(op, &mut buf)?;
                self.write_text(&format!("noise_op_{j}.coo"), &String::from_utf8_lossy(&buf))?;
            }
        }
        let g_in = self.config.initial.build(&basis)?;
        let solver_cfg = self.config.solver_config();
        let path = BrownianPath::sample(
            bundle.noise_ops().len(),
            self.config.seed,
            solver_cfg.dt,
            solver_cfg.steps(),
        );
        let params = self.config.diagnostics.to_params();
        let traj = solver::integrate(&g_in, &bundle, &path, &solver_cfg, &params)?;
        self.write_text("reports.csv", &self.reports_csv(&traj))?;
        if !traj.snapshots.is_empty() {
            #[derive(Serialize)]
            struct SnapshotDump {
                index_manifest: Vec<(Vec<i64>, Vec<u32>)>,
                times: Vec<f64>,
                /// per snapshot: interleaved re, im per coefficient
                coefficients: Vec<Vec<f64>>,
            }
            let manifest = (0..basis.dim())
                .map(|ord| {
                    let idx = basis.index(ord);
                    (idx.k, idx.l)
                })
                .collect();
            let dump = SnapshotDump {
                index_manifest: manifest,
                times: traj.snapshots.iter().map(|(t, _)| *t).collect(),
                coefficients: traj
                    .snapshots
                    .iter()
                    .map(|(_, s)| {
                        s.coeffs()
                            .iter()
                            .flat_map(|c| [c.re, c.im])
                            .collect::<Vec<f64>>()
                    })
                    .collect(),
            };
            self.write_json("snapshots.json", &dump)?;
        }
        println!(
            "simulate: {} captures to t = {}, wrote {}",
            traj.times.len(),
            solver_cfg.t_end,
            self.out_dir.join("reports.csv").display()
        );
        Ok(())
    }

    fn ensemble_core(&self) -> Result<(ensemble::EnsembleResult, kinfp::SpectralState)> {
        let (basis, bundle) = self.setup()?;
        let g_in = self.config.initial.build(&basis)?;
        let params = self.config.diagnostics.to_params();
        let result = ensemble::run_ensemble(
            &bundle,
            &g_in,
            &self.ensemble_config(g_in.mass()),
            &params,
        )?;
        Ok((result, g_in))
    }

    fn mean_series_csv(&self, result: &ensemble::EnsembleResult) -> String {
        let mut csv = self.provenance_comment("kinfp-ensemble-mean-v1");
        csv.push_str("t");
        let columns: Vec<(&str, fn(&diagnostics::EnergyReport) -> f64)> = vec![
            ("norm_sq", |r| r.norm_sq),
            ("grad_x_sq", |r| r.grad_x_sq),
            ("d_sq", |r| r.d_sq),
            ("dstar_sq", |r| r.dstar_sq),
            ("cross", |r| r.cross),
            ("f_func", |r| r.f_func),
            ("k_func", |r| r.k_func),
            ("mass", |r| r.mass),
            ("hypo_norm", |r| r.hypo_norm),
        ];
        for (name, _) in &columns {
            csv.push_str(&format!(",{name}_mean,{name}_stderr"));
        }
        csv.push('\n');
        let stats: Vec<ensemble::ScalarStats> = columns
            .iter()
            .map(|(_, f)| result.scalar_stats(f))
            .collect();
        for (ti, t) in result.times.iter().enumerate() {
            csv.push_str(&format!("{t:.12e}"));
            for s in &stats {
                csv.push_str(&format!(",{:.12e},{:.12e}", s.mean[ti], s.stderr[ti]));
            }
            csv.push('\n');
        }
        csv
    }

    fn ensemble(&self) -> Result<()> {
        let (result, _) = self.ensemble_core()?;
        self.write_text("ensemble_mean.csv", &self.mean_series_csv(&result))?;
        // With snapshots captured, also report the termwise inequality
        // margins and the regularization table on the ensemble means.
        let functionals = result.snapshot_functionals();
        let margins = if functionals.len() >= 2 {
            diagnostics::termwise_margins(&functionals, self.config.lambda, self.config.n_dim)
        } else {
            Vec::new()
        };
        let d_stats = result.scalar_stats(|r| r.d_sq);
        let g_stats = result.scalar_stats(|r| r.grad_x_sq);
        let regularization = diagnostics::regularization_table(
            &result.times,
            &d_stats.mean,
            &g_stats.mean,
            self.config.solver.t_end,
        );
        #[derive(Serialize)]
        struct Summary {
            realizations: usize,
            aborted: Vec<(usize, String)>,
            final_norm_sq_mean: f64,
            final_norm_sq_stderr: f64,
            termwise_margins: Vec<diagnostics::TermwiseMargins>,
            regularization: diagnostics::RegularizationTable,
        }
        let stats = result.scalar_stats(|r| r.norm_sq);
        self.write_json(
            "ensemble_summary.json",
            &Summary {
                realizations: result.realizations.len(),
                aborted: result.aborted.clone(),
                final_norm_sq_mean: *stats.mean.last().unwrap(),
                final_norm_sq_stderr: *stats.stderr.last().unwrap(),
                termwise_margins: margins,
                regularization,
            },
        )?;
        if !result.aborted.is_empty() {
            eprintln!(
                "warning: {} of {} realizations aborted",
                result.aborted.len(),
                self.config.ensemble.size
            );
        }
        println!(
            "ensemble: {} realizations, wrote {}",
            result.realizations.len(),
            self.out_dir.join("ensemble_mean.csv").display()
        );
        Ok(())
    }

    fn decay_fit(&self) -> Result<()> {
        let (result, _) = self.ensemble_core()?;
        let selector: fn(&diagnostics::EnergyReport) -> f64 =
            match self.config.fit.quantity.as_str() {
                "norm-sq" => |r| r.norm_sq,
                "hypo-norm" => |r| r.hypo_norm,
                "f-func" => |r| r.f_func,
                "d-sq" => |r| r.d_sq,
                "grad-x-sq" => |r| r.grad_x_sq,
                other => bail!("unknown fit quantity `{other}`"),
            };
        let stats = result.scalar_stats(selector);
        let fit = diagnostics::fit_decay(
            &result.times,
            &stats.mean,
            self.config.fit.window,
            self.config.fit.floor_mode()?,
        )?;
        self.write_text("ensemble_mean.csv", &self.mean_series_csv(&result))?;
        #[derive(Serialize)]
        struct FitOut {
            quantity: String,
            fit: diagnostics::DecayFit,
        }
        self.write_json(
            "decay_fit.json",
            &FitOut {
                quantity: self.config.fit.quantity.clone(),
                fit,
            },
        )?;
        println!(
            "decay-fit: rate = {:.6}, r² = {:.6} on {:?} ({})",
            fit.rate, fit.r_squared, self.config.fit.window, self.config.fit.quantity
        );
        Ok(())
    }

    fn invariant(&self) -> Result<()> {
        let (basis, bundle) = self.setup()?;
        let g_in = self.config.initial.build(&basis)?;
        let mut cfg = self.ensemble_config(g_in.mass());
        cfg.solver.t_end = self.config.invariant.burn_in + self.config.invariant.horizon;
        let snap = cfg.solver.diag_every;
        cfg.solver.snapshot_every = Some(cfg.solver.snapshot_every.unwrap_or(snap));
        let mut functionals =
            TestFunctional::default_family(self.config.n_dim, self.config.invariant.clip);
        functionals.push(TestFunctional::NormSq);
        let est = ensemble::estimate_invariant(
            &bundle,
            &g_in,
            &cfg,
            &functionals,
            self.config.invariant.burn_in,
        )?;
        self.write_json("invariant.json", &est)?;
        println!(
            "invariant: {} snapshots over [{}, {}], {} functionals",
            est.snapshot_count,
            self.config.invariant.burn_in,
            cfg.solver.t_end,
            est.names.len()
        );
        Ok(())
    }

    fn mixing(&self) -> Result<()> {
        let (basis, bundle) = self.setup()?;
        let g1 = self.config.initial.build(&basis)?;
        let g2 = self.config.mixing.build(&basis)?;
        let cfg = self.ensemble_config(g1.mass());
        let result = ensemble::mixing_experiment(
            &bundle,
            &g1,
            &g2,
            &cfg,
            self.config.fit.window,
        )?;
        let mut csv = self.provenance_comment("kinfp-mixing-v1");
        csv.push_str("t,mean_diff_sq,stderr_diff_sq\n");
        for ((t, m), s) in result
            .times
            .iter()
            .zip(&result.mean_diff_sq)
            .zip(&result.stderr_diff_sq)
        {
            csv.push_str(&format!("{t:.12e},{m:.12e},{s:.12e}\n"));
        }
        self.write_text("mixing.csv", &csv)?;
        self.write_json("mixing.json", &result.fit)?;
        println!(
            "mixing: contraction rate {:.6} (r² = {:.6})",
            result.fit.rate, result.fit.r_squared
        );
        Ok(())
    }

    fn validate_suite(&self) -> Result<()> {
        let checks = validate::run_all();
        let mut failed = 0;
        for c in &checks {
            println!(
                "{:<34} {} {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
            if !c.passed {
                failed += 1;
            }
        }
        #[derive(Serialize)]
        struct ValidateOut {
            checks: Vec<validate::CheckResult>,
            failed: usize,
        }
        self.write_json(
            "validate.json",
            &ValidateOut {
                checks: checks.clone(),
                failed,
            },
        )?;
        if failed > 0 {
            bail!("{failed} of {} checks failed", checks.len());
        }
        println!("all {} checks passed", checks.len());
        Ok(())
    }

    fn oracle_compare(&self) -> Result<()> {
        let (basis, bundle) = self.setup()?;
        let noise = self.config.noise_spec()?;
        let solver_cfg = self.config.solver_config();
        let steps = solver_cfg.steps();
        let path = BrownianPath::sample(
            bundle.noise_ops().len(),
            self.config.seed,
            solver_cfg.dt,
            steps,
        );
        let g_in = self.config.initial.build(&basis)?;
        let mut state = g_in.clone();
        let mut stepper = Stepper::new(&bundle, &solver_cfg)?;
        let n = self.config.n_dim;
        let k0 = vec![0i64; n];
        let unit_l = |a: usize| {
            let mut l = vec![0u32; n];
            l[a] = 1;
            l
        };
        let mut pde_u: Vec<Vec<f64>> =
            vec![(0..n).map(|a| state.coeff(&k0, &unit_l(a)).re).collect()];
        for step in 0..steps {
            stepper.step(&mut state, &path, step);
            pde_u.push((0..n).map(|a| state.coeff(&k0, &unit_l(a)).re).collect());
        }

        let mut ens = ParticleEnsemble::maxwellian(
            self.config.particles.count,
            n,
            rng::derive_seed(self.config.seed, 0x9a97),
        );
        let lconfig = LangevinConfig {
            lambda: self.config.lambda,
            dt: solver_cfg.dt,
            scheme: self.config.particles.langevin_scheme()?,
            thermal_noise: true,
            hat_seed: self.config.particles.hat_seed,
        };
        let traj =
            particle::simulate_langevin(&mut ens, &noise.fields, &path, &lconfig, steps, 1)?;

        let mut csv = self.provenance_comment("kinfp-oracle-compare-v1");
        csv.push_str("t");
        for a in 1..=n {
            csv.push_str(&format!(",u{a}_pde,u{a}_particle,u{a}_gap"));
        }
        csv.push('\n');
        let mut sup_gap = 0.0f64;
        for (i, t) in traj.times.iter().enumerate() {
            csv.push_str(&format!("{t:.12e}"));
            for a in 0..n {
                let up = pde_u[i][a];
                let upart = traj.mean_velocity[i][a];
                sup_gap = sup_gap.max((up - upart).abs());
                csv.push_str(&format!(
                    ",{up:.12e},{upart:.12e},{:.12e}",
                    (up - upart).abs()
                ));
            }
            csv.push('\n');
        }
        self.write_text("oracle_compare.csv", &csv)?;
        let mut particle_csv = Vec::new();
        ens.write_csv(&mut particle_csv)?;
        let mut body = self.provenance_comment("kinfp-particles-v1");
        body.push_str(&String::from_utf8_lossy(&particle_csv));
        self.write_text("particles.csv", &body)?;
        let moments = particle::compare_moments(&state, &ens)?;
        #[derive(Serialize)]
        struct OracleOut {
            sup_mean_velocity_gap: f64,
            budget: f64,
            final_moments: particle::MomentDiscrepancy,
        }
        let budget = 3.0
            * (solver_cfg.dt + (self.config.particles.count as f64).powf(-0.5));
        self.write_json(
            "oracle_compare.json",
            &OracleOut {
                sup_mean_velocity_gap: sup_gap,
                budget,
                final_moments: moments,
            },
        )?;
        println!(
            "oracle-compare: sup mean-velocity gap {sup_gap:.4e} (budget {budget:.4e}, P = {})",
            self.config.particles.count
        );
        if sup_gap > budget {
            bail!("pathwise coupling gap {sup_gap:.4e} exceeds budget {budget:.4e}");
        }
        Ok(())
    }
}

/// Echo the resolved config next to the artifacts.
pub fn write_echo(runner: &Runner) -> Result<()> {
    let mut body = String::new();
    body.push_str(&format!("# config_sha256 = {}\n", runner.hash));
    body.push_str(&runner.echo);
    let path = runner.out_dir.join("config.echo.toml");
    let mut f = fs::File::create(&path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

/// Resolve the output directory, keeping relative paths under the
/// current directory.
pub fn resolve_out_dir(flag: Option<&Path>, config_default: &str) -> PathBuf {
    flag.map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from(config_default))
}
