//! Scalar functionals of a state, decay-rate fitting and the
//! inequality margins monitored along trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::SpectralState;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("balance parameters need gamma^2 < alpha*beta and c^2 < a*b")]
    BadParameters,
    #[error("fit window [{0}, {1}] selects fewer than three samples")]
    WindowTooSmall(f64, f64),
    #[error("non-positive value after floor subtraction at t = {0}; shrink the window or floor")]
    NonPositiveAfterFloor(f64),
}

/// Weights of the balance functional
/// `F(g) = |g|² + α|∇_x g|² + β|Dg|² + 2γ<∇_x g, Dg>`
/// and of its time-weighted counterpart
/// `K_t(g) = |g|² + a t³|∇_x g|² + b t|Dg|² + 2c t²<∇_x g, Dg>`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagnosticsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub reg_a: f64,
    pub reg_b: f64,
    pub reg_c: f64,
}

impl Default for DiagnosticsParams {
    fn default() -> Self {
        // Shape α=1, β=γ with γ small; same for the regularization
        // weights. Small enough for N <= 2, adjustable in config.
        DiagnosticsParams {
            alpha: 1.0,
            beta: 0.05,
            gamma: 0.05,
            reg_a: 1.0,
            reg_b: 0.05,
            reg_c: 0.05,
        }
    }
}

impl DiagnosticsParams {
    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        let pos = self.alpha > 0.0 && self.beta > 0.0 && self.gamma > 0.0;
        if pos
            && self.gamma * self.gamma < self.alpha * self.beta
            && self.reg_c * self.reg_c < self.reg_a * self.reg_b
        {
            Ok(())
        } else {
            Err(DiagnosticsError::BadParameters)
        }
    }

    /// Sandwich constants `C1 |g|²_{∇,D} <= F(g) <= C2 |g|²_{∇,D}`
    /// from the extreme eigenvalues of the quadratic form.
    pub fn sandwich_constants(&self, n_dim: usize) -> (f64, f64) {
        let half = 0.5 * (self.alpha + self.beta);
        let disc = (0.25 * (self.alpha - self.beta).powi(2) + self.gamma * self.gamma).sqrt();
        let lo = half - disc;
        let hi = half + disc;
        let inv_n = 1.0 / n_dim as f64;
        (lo.min(inv_n), hi.max(inv_n))
    }
}

/// Scalar functionals of one state at one time. All entries are exact
/// sums over the coefficient array.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// |g|²
    pub norm_sq: f64,
    /// |∇_x g|²
    pub grad_x_sq: f64,
    /// |Dg|²
    pub d_sq: f64,
    /// |D*g|² (unprojected; equals d_sq + N·norm_sq identically)
    pub dstar_sq: f64,
    /// Re <∇_x g, Dg>
    pub cross: f64,
    /// balance functional F(g)
    pub f_func: f64,
    /// time-weighted functional K_t(g)
    pub k_func: f64,
    /// conserved mass (ground-mode coefficient)
    pub mass: f64,
    /// |g|²_{∇,D} = |D*g|² + |∇_x g|²
    pub hypo_norm: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str =
        "t,norm_sq,grad_x_sq,d_sq,dstar_sq,cross,f_func,k_func,mass,hypo_norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.t,
            self.norm_sq,
            self.grad_x_sq,
            self.d_sq,
            self.dstar_sq,
            self.cross,
            self.f_func,
            self.k_func,
            self.mass,
            self.hypo_norm
        )
    }
}

/// All first-order functionals in one O(dim) pass.
pub fn report(state: &SpectralState, t: f64, params: &DiagnosticsParams) -> EnergyReport {
    let basis = state.basis();
    let n = basis.n_dim() as f64;
    let tau = std::f64::consts::TAU;
    let mut norm_sq = 0.0;
    let mut grad_x_sq = 0.0;
    let mut d_sq = 0.0;
    for (ord, c) in state.coeffs().iter().enumerate() {
        let w = c.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let k_sq: f64 = basis
            .fourier_mode(ord)
            .iter()
            .map(|&k| (k * k) as f64)
            .sum();
        norm_sq += w;
        grad_x_sq += tau * tau * k_sq * w;
        d_sq += basis.hermite_total(ord) as f64 * w;
    }
    // <∇_x g, Dg> couples (k,l) to (k,l+e_a).
    let mut cross = 0.0;
    for (ord, c) in state.coeffs().iter().enumerate() {
        if *c == num_complex::Complex64::ZERO {
            continue;
        }
        for axis in 0..basis.n_dim() {
            let ka = basis.fourier_mode(ord)[axis] as f64;
            if ka == 0.0 {
                continue;
            }
            if let Some(up) = basis.raised_ordinal(ord, axis) {
                let la = basis.hermite_degrees(ord)[axis] as f64;
                let grad_coeff = num_complex::Complex64::new(0.0, tau * ka) * c;
                let d_coeff = state.coeffs()[up] * (la + 1.0).sqrt();
                cross += (grad_coeff.conj() * d_coeff).re;
            }
        }
    }
    let dstar_sq = d_sq + n * norm_sq;
    let f_func =
        norm_sq + params.alpha * grad_x_sq + params.beta * d_sq + 2.0 * params.gamma * cross;
    let k_func = norm_sq
        + params.reg_a * t.powi(3) * grad_x_sq
        + params.reg_b * t * d_sq
        + 2.0 * params.reg_c * t * t * cross;
    EnergyReport {
        t,
        norm_sq,
        grad_x_sq,
        d_sq,
        dstar_sq,
        cross,
        f_func,
        k_func,
        mass: state.mass(),
        hypo_norm: dstar_sq + grad_x_sq,
    }
}

/// Second-order functionals needed by the termwise inequality margins.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecondOrderFunctionals {
    /// |D²g|²
    pub d2_sq: f64,
    /// |D ∇_x g|²
    pub d_grad_sq: f64,
    /// |(D*)² g|²
    pub dstar2_sq: f64,
    /// |D D* g|²
    pub d_dstar_sq: f64,
    /// |Π_{m,m-1} ∇_x g|² (gradient with the top Hermite level cut)
    pub grad_cut_sq: f64,
    /// |D* Π_{m,m-1} ∇_x g|²
    pub dstar_grad_cut_sq: f64,
}

pub fn second_order(state: &SpectralState) -> SecondOrderFunctionals {
    let basis = state.basis();
    let n = basis.n_dim() as f64;
    let m_v = basis.truncation().m_v as u32;
    let tau_sq = std::f64::consts::TAU * std::f64::consts::TAU;
    let mut out = SecondOrderFunctionals::default();
    for (ord, c) in state.coeffs().iter().enumerate() {
        let w = c.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let lt = basis.hermite_total(ord) as f64;
        let k_sq: f64 = basis
            .fourier_mode(ord)
            .iter()
            .map(|&k| (k * k) as f64)
            .sum();
        let grad_w = tau_sq * k_sq * w;
        out.d2_sq += (lt * lt - lt).max(0.0) * w;
        out.d_grad_sq += lt * grad_w;
        // Σ_{a,b}(l_b+1)(l_a+δ_ab+1) = (|l|+N)(|l|+N+1)
        out.dstar2_sq += (lt + n) * (lt + n + 1.0) * w;
        // Σ_{a,b}(l_b+1)(l_a+δ_ab) = (|l|+1)(|l|+N)
        out.d_dstar_sq += (lt + 1.0) * (lt + n) * w;
        if basis.hermite_total(ord) <= m_v.saturating_sub(1) {
            out.grad_cut_sq += grad_w;
            out.dstar_grad_cut_sq += (lt + n) * grad_w;
        }
    }
    out
}

/// Exponential-decay fit of a scalar series.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    /// fitted exponent: values behave like exp(-rate * t)
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub floor: f64,
}

/// How the asymptotic floor is estimated before the log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FloorMode {
    /// Subtract nothing; the quantity decays to zero.
    Zero,
    /// Subtract the mean of the last tenth of the window (additive
    /// equilibrium offset).
    TailMean,
}

fn log_linear_fit(
    points: &[(f64, f64)],
    floor: f64,
    strict: bool,
) -> Result<(f64, f64, f64), DiagnosticsError> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(t, v) in points {
        let shifted = v - floor;
        if shifted <= 0.0 {
            if strict {
                return Err(DiagnosticsError::NonPositiveAfterFloor(t));
            }
            continue;
        }
        xs.push(t);
        ys.push(shifted.ln());
    }
    if xs.len() < 3 {
        return Err(DiagnosticsError::NonPositiveAfterFloor(
            points.first().map(|p| p.0).unwrap_or(0.0),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = intercept + slope * x;
            (y - pred) * (y - pred)
        })
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((slope, intercept, r_squared))
}

/// Least-squares fit of `log(y - floor)` against `t` on the window.
///
/// With `FloorMode::TailMean` the floor starts as the mean of the last
/// tenth of the window and is then debiased: the tail mean also
/// contains the not-yet-decayed part `A(e^{-rt1} - e^{-rt2})/(r Δt)`,
/// which is predicted from the current fit and subtracted, iterating
/// to a fixed point. Without this correction a window reaching into
/// the floor region distorts the fitted rate.
pub fn fit_decay(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    floor_mode: FloorMode,
) -> Result<DecayFit, DiagnosticsError> {
    assert_eq!(times.len(), values.len());
    let in_window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(&t, &v)| (t, v))
        .collect();
    if in_window.len() < 3 {
        return Err(DiagnosticsError::WindowTooSmall(window.0, window.1));
    }

    let floor = match floor_mode {
        FloorMode::Zero => 0.0,
        FloorMode::TailMean => {
            let tail_start = window.1 - 0.1 * (window.1 - window.0);
            let tail: Vec<&(f64, f64)> = in_window
                .iter()
                .filter(|(t, _)| *t >= tail_start)
                .collect();
            let raw = tail.iter().map(|(_, v)| v).sum::<f64>() / tail.len() as f64;
            let t1 = tail.first().map(|p| p.0).unwrap_or(tail_start);
            let t2 = tail.last().map(|p| p.0).unwrap_or(window.1);
            let mut floor = raw;
            if t2 > t1 {
                for _ in 0..8 {
                    let Ok((slope, intercept, _)) = log_linear_fit(&in_window, floor, false)
                    else {
                        break;
                    };
                    let rate = -slope;
                    if rate <= 1e-12 {
                        break;
                    }
                    let amp = intercept.exp();
                    let residual = amp * ((-rate * t1).exp() - (-rate * t2).exp())
                        / (rate * (t2 - t1));
                    let next = raw - residual;
                    if (next - floor).abs() <= 1e-12 * floor.abs().max(1.0) {
                        floor = next;
                        break;
                    }
                    floor = next;
                }
            }
            floor
        }
    };

    let (slope, intercept, r_squared) = log_linear_fit(&in_window, floor, true)?;
    Ok(DecayFit {
        rate: -slope,
        intercept,
        r_squared,
        window,
        floor,
    })
}

/// Signed margins of the four closed-form differential inequalities,
/// evaluated on ensemble means at capture midpoints (centered
/// difference in time). Positive margin means the inequality holds.
/// Reporting only; the constants are the ones our derivation yields.
#[derive(Debug, Clone, Serialize)]
pub struct TermwiseMargins {
    pub t: f64,
    /// λ²E(|Dg|²+N|g|²) - d/dt ½E|g|² - E|Dg|²
    pub norm_balance: f64,
    /// gradient estimate margin
    pub grad_balance: f64,
    /// |Dg|² estimate margin
    pub d_balance: f64,
    /// cross-term estimate margin
    pub cross_balance: f64,
}

/// Per-capture first and second order ensemble means.
#[derive(Debug, Clone, Default)]
pub struct EnsembleFunctionals {
    pub t: f64,
    pub norm_sq: f64,
    pub grad_x_sq: f64,
    pub d_sq: f64,
    pub cross: f64,
    pub second: SecondOrderFunctionals,
}

pub fn ensemble_functionals(states: &[SpectralState], t: f64) -> EnsembleFunctionals {
    let params = DiagnosticsParams::default();
    let m = states.len() as f64;
    let mut out = EnsembleFunctionals {
        t,
        ..Default::default()
    };
    for s in states {
        let r = report(s, t, &params);
        let so = second_order(s);
        out.norm_sq += r.norm_sq / m;
        out.grad_x_sq += r.grad_x_sq / m;
        out.d_sq += r.d_sq / m;
        out.cross += r.cross / m;
        out.second.d2_sq += so.d2_sq / m;
        out.second.d_grad_sq += so.d_grad_sq / m;
        out.second.dstar2_sq += so.dstar2_sq / m;
        out.second.d_dstar_sq += so.d_dstar_sq / m;
        out.second.grad_cut_sq += so.grad_cut_sq / m;
        out.second.dstar_grad_cut_sq += so.dstar_grad_cut_sq / m;
    }
    out
}

/// Centered-difference margins between consecutive captures.
pub fn termwise_margins(
    series: &[EnsembleFunctionals],
    lambda: f64,
    n_dim: usize,
) -> Vec<TermwiseMargins> {
    let n = n_dim as f64;
    let l2 = lambda * lambda;
    let mut out = Vec::new();
    for pair in series.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        if dt <= 0.0 {
            continue;
        }
        let t_mid = 0.5 * (a.t + b.t);
        let mid = |fa: f64, fb: f64| 0.5 * (fa + fb);

        let norm_sq = mid(a.norm_sq, b.norm_sq);
        let d_sq = mid(a.d_sq, b.d_sq);
        let dstar_sq = d_sq + n * norm_sq;
        let d2_sq = mid(a.second.d2_sq, b.second.d2_sq);
        let d_grad_sq = mid(a.second.d_grad_sq, b.second.d_grad_sq);
        let dstar2_sq = mid(a.second.dstar2_sq, b.second.dstar2_sq);
        let d_dstar_sq = mid(a.second.d_dstar_sq, b.second.d_dstar_sq);
        let grad_cut_sq = mid(a.second.grad_cut_sq, b.second.grad_cut_sq);
        let dstar_grad_cut_sq =
            mid(a.second.dstar_grad_cut_sq, b.second.dstar_grad_cut_sq);

        // d/dt ½|g|² + |Dg|² <= λ²(|Dg|² + N|g|²)
        let norm_balance =
            l2 * dstar_sq - (0.5 * (b.norm_sq - a.norm_sq) / dt + d_sq);

        // d/dt ½|∇g|² + |D∇g|² <= λ²/2 [ |D*g|² + (2|D*g| + |D*Π∇g|)(|D∇g| + |D*Π∇g|) ]
        let rhs2 = 0.5
            * l2
            * (dstar_sq
                + (2.0 * dstar_sq.sqrt() + dstar_grad_cut_sq.sqrt())
                    * (d_grad_sq.sqrt() + dstar_grad_cut_sq.sqrt()));
        let grad_balance = rhs2 - (0.5 * (b.grad_x_sq - a.grad_x_sq) / dt + d_grad_sq);

        // d/dt ½|Dg|² + |D²g|² <= |Π∇g||Dg| + λ²/2 (|D*²g|² + |DD*g|²)
        let rhs3 =
            (grad_cut_sq * d_sq).sqrt() + 0.5 * l2 * (dstar2_sq + d_dstar_sq);
        let d_balance = rhs3 - (0.5 * (b.d_sq - a.d_sq) / dt + d2_sq);

        // d/dt <∇g,Dg> + |Π∇g|² <= |D∇g|² + 2|D∇g||D²g| + N|Dg||Π∇g|
        //   + λ²/2 [ |D*²g|(|D∇g| + |D*Π∇g|) + 2|DD*g|(|D*Π∇g| + |D*g|) ]
        let rhs4 = d_grad_sq
            + 2.0 * (d_grad_sq * d2_sq).sqrt()
            + n * (d_sq * grad_cut_sq).sqrt()
            + 0.5
                * l2
                * (dstar2_sq.sqrt() * (d_grad_sq.sqrt() + dstar_grad_cut_sq.sqrt())
                    + 2.0 * d_dstar_sq.sqrt() * (dstar_grad_cut_sq.sqrt() + dstar_sq.sqrt()));
        let cross_balance = rhs4 - ((b.cross - a.cross) / dt + grad_cut_sq);

        out.push(TermwiseMargins {
            t: t_mid,
            norm_balance,
            grad_balance,
            d_balance,
            cross_balance,
        });
    }
    out
}

/// Regularization table: t·E|Dg|² and t³·E|∇_x g|² on (0, t0].
#[derive(Debug, Clone, Serialize)]
pub struct RegularizationTable {
    pub times: Vec<f64>,
    pub t_d_sq: Vec<f64>,
    pub t3_grad_sq: Vec<f64>,
    /// max of both columns over the window, to compare against
    /// C·E|g_in|² with C fitted at the coarsest truncation
    pub sup: f64,
}

pub fn regularization_table(
    times: &[f64],
    mean_d_sq: &[f64],
    mean_grad_sq: &[f64],
    t0: f64,
) -> RegularizationTable {
    let mut out = RegularizationTable {
        times: Vec::new(),
        t_d_sq: Vec::new(),
        t3_grad_sq: Vec::new(),
        sup: 0.0,
    };
    for ((&t, &d), &g) in times.iter().zip(mean_d_sq).zip(mean_grad_sq) {
        if t <= 0.0 || t > t0 {
            continue;
        }
        let td = t * d;
        let t3g = t.powi(3) * g;
        out.sup = out.sup.max(td).max(t3g);
        out.times.push(t);
        out.t_d_sq.push(td);
        out.t3_grad_sq.push(t3g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Basis, TruncationSpec};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn basis(n: usize, m_x: usize, m_v: usize) -> Arc<Basis> {
        Basis::new(TruncationSpec::new(n, m_x, m_v)).unwrap()
    }

    #[test]
    fn ground_state_report() {
        let b = basis(1, 1, 2);
        let g = SpectralState::ground(&b, 1.0);
        let r = report(&g, 0.0, &DiagnosticsParams::default());
        assert_eq!(r.norm_sq, 1.0);
        assert_eq!(r.grad_x_sq, 0.0);
        assert_eq!(r.d_sq, 0.0);
        assert_eq!(r.cross, 0.0);
        assert_eq!(r.f_func, 1.0);
        assert_eq!(r.mass, 1.0);
    }

    #[test]
    fn first_hermite_mode_report() {
        let b = basis(1, 1, 3);
        let g = SpectralState::basis_vector(&b, &[0], &[1]).unwrap();
        let r = report(&g, 0.0, &DiagnosticsParams::default());
        assert_abs_diff_eq!(r.d_sq, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.dstar_sq, 2.0, epsilon = 1e-15);
        assert_eq!(r.grad_x_sq, 0.0);
    }

    #[test]
    fn report_matches_primitive_functionals() {
        let b = basis(2, 1, 3);
        let g = SpectralState::random_mass(&b, 9, 0.5);
        let r = report(&g, 0.7, &DiagnosticsParams::default());
        let mut d_sq = 0.0;
        let mut grad_sq = 0.0;
        let mut cross = 0.0;
        for a in 0..2 {
            d_sq += g.apply_lower(a).norm_sq();
            let ga = g.apply_grad_x(a);
            grad_sq += ga.norm_sq();
            cross += ga.inner(&g.apply_lower(a)).re;
        }
        assert_abs_diff_eq!(r.d_sq, d_sq, epsilon = 1e-12);
        assert_abs_diff_eq!(r.grad_x_sq, grad_sq, epsilon = 1e-12);
        assert_abs_diff_eq!(r.cross, cross, epsilon = 1e-12);
        // Cauchy-Schwarz bound on the cross term.
        assert!(r.cross.abs() <= (r.grad_x_sq * r.d_sq).sqrt() + 1e-12);
        // Ladder norm identity embedded in the report.
        assert_abs_diff_eq!(r.dstar_sq, r.d_sq + 2.0 * r.norm_sq, epsilon = 1e-12);
    }

    #[test]
    fn second_order_matches_primitives() {
        let b = basis(2, 1, 4);
        let g = SpectralState::random_mass(&b, 13, 0.2);
        let so = second_order(&g);
        let mut d2 = 0.0;
        let mut dgrad = 0.0;
        let mut dstar2 = 0.0;
        let mut ddstar = 0.0;
        for a in 0..2 {
            for bx in 0..2 {
                d2 += g.apply_lower(bx).apply_lower(a).norm_sq();
                dgrad += g.apply_grad_x(bx).apply_lower(a).norm_sq();
            }
        }
        // Unprojected raises need headroom: embed in a larger basis.
        let big = basis(2, 1, 6);
        let mut embedded = SpectralState::zero(&big);
        for (ord, c) in g.coeffs().iter().enumerate() {
            let idx = g.basis().index(ord);
            let target = big.flat_index(&idx.k, &idx.l).unwrap();
            embedded.coeffs_mut()[target] = *c;
        }
        for a in 0..2 {
            for bx in 0..2 {
                dstar2 += embedded.apply_raise(bx).apply_raise(a).norm_sq();
                ddstar += embedded.apply_raise(bx).apply_lower(a).norm_sq();
            }
        }
        assert_abs_diff_eq!(so.d2_sq, d2, epsilon = 1e-11);
        assert_abs_diff_eq!(so.d_grad_sq, dgrad, epsilon = 1e-11);
        assert_abs_diff_eq!(so.dstar2_sq, dstar2, epsilon = 1e-11);
        assert_abs_diff_eq!(so.d_dstar_sq, ddstar, epsilon = 1e-11);
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| 2.5 * (-3.0 * t).exp() + 0.1).collect();
        let fit = fit_decay(&times, &values, (0.0, 2.0), FloorMode::TailMean).unwrap();
        assert!((fit.rate - 3.0).abs() / 3.0 < 0.01, "rate {}", fit.rate);
        assert!(fit.r_squared > 0.99);
    }

    #[test]
    fn fit_on_exact_exponential_is_sharp() {
        let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| (-1.7 * t).exp()).collect();
        let fit = fit_decay(&times, &values, (0.5, 4.5), FloorMode::Zero).unwrap();
        assert_abs_diff_eq!(fit.rate, 1.7, epsilon = 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_rejects_bad_floor() {
        // Values oscillating below the asymptote cannot be shifted to
        // a positive decaying series: must signal, not NaN.
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(i, t)| 0.1 + (-2.0 * t).exp() + if i % 2 == 0 { 1e-3 } else { -1e-3 })
            .collect();
        let err = fit_decay(&times, &values, (0.0, 9.9), FloorMode::TailMean);
        assert!(matches!(
            err,
            Err(DiagnosticsError::NonPositiveAfterFloor(_))
        ));
    }

    #[test]
    fn sandwich_constants_hold_on_random_states() {
        let params = DiagnosticsParams::default();
        params.validate().unwrap();
        let b = basis(1, 2, 4);
        let (c1, c2) = params.sandwich_constants(1);
        for seed in 0..1000 {
            let g = SpectralState::random_mass(&b, seed, 0.3);
            let r = report(&g, 0.0, &params);
            let ratio = r.f_func / r.hypo_norm;
            assert!(ratio >= c1 - 1e-12, "ratio {ratio} < C1 {c1}");
            assert!(ratio <= c2 + 1e-12, "ratio {ratio} > C2 {c2}");
        }
    }
}
