//! Linearized Ricci flow `∂ₜh = -Δ_L h` on torus backends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{TensorField, Valence};
use crate::gauge::{cn_residual, mean_trace};
use crate::geometry::ManifoldContext;
use crate::operators::{lichnerowicz, LichnerowiczVariant, OperatorId};
use crate::reduce;
use crate::spectral::{
    assemble, eigensolve_with, full_spectrum, spectral_window, BlockSymbol, OperatorHandle, SpectralBackend,
    SpectralWindowReport,
};

/// Real-axis stability limit of classical RK4 (`|1 + z + z²/2 + z³/6 + z⁴/24| ≤ 1`).
pub const RK4_STABILITY: f64 = 2.785;

/// Label attached to flows on non-Einstein backgrounds.
pub const OPERATOR_FLOW_LABEL: &str = "operator flow, not geometric linearized Ricci flow";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    SpectralExact,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    /// `None` in thin mode.
    pub states: Option<Vec<TensorField>>,
    pub final_state: TensorField,
    pub l2_norms: Vec<f64>,
    pub cn_residual_norms: Vec<f64>,
    pub mean_traces: Vec<f64>,
    pub integrator: Integrator,
    pub dt: Option<f64>,
    pub label: Option<String>,
}

impl FlowTrajectory {
    fn start(ctx: &ManifoldContext, integrator: Integrator, dt: Option<f64>, thin: bool, h0: &TensorField) -> Result<Self> {
        let mut t = FlowTrajectory {
            times: Vec::new(),
            states: if thin { None } else { Some(Vec::new()) },
            final_state: h0.clone(),
            l2_norms: Vec::new(),
            cn_residual_norms: Vec::new(),
            mean_traces: Vec::new(),
            integrator,
            dt,
            label: if ctx.exact_einstein.is_none() {
                Some(OPERATOR_FLOW_LABEL.to_string())
            } else {
                None
            },
        };
        t.record(ctx, 0.0, h0)?;
        Ok(t)
    }

    fn record(&mut self, ctx: &ManifoldContext, time: f64, h: &TensorField) -> Result<()> {
        self.times.push(time);
        self.l2_norms.push(ctx.l2_norm(h)?);
        self.cn_residual_norms.push(ctx.l2_norm(&cn_residual(ctx, h)?)?);
        self.mean_traces.push(mean_trace(ctx, h)?);
        if let Some(s) = self.states.as_mut() {
            s.push(h.clone());
        }
        self.final_state = h.clone();
        Ok(())
    }

    /// CSV with columns `t,l2_norm,cn_residual,mean_trace`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,l2_norm,cn_residual,mean_trace\n");
        for i in 0..self.times.len() {
            s.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.times[i], self.l2_norms[i], self.cn_residual_norms[i], self.mean_traces[i]
            ));
        }
        s
    }
}

fn lichnerowicz_id() -> OperatorId {
    OperatorId::lichnerowicz(LichnerowiczVariant::General)
}

/// `e^{-tΔ_L}` applied blockwise in Fourier space on a flat torus.
pub struct ExactFlow<'a> {
    handle: OperatorHandle<'a>,
    symbol: BlockSymbol,
}

impl<'a> ExactFlow<'a> {
    pub fn new(ctx: &'a ManifoldContext) -> Result<Self> {
        if !(ctx.is_torus() && ctx.flat) {
            return Err(Error::Unsupported(
                "the exact integrator needs a flat torus (Fourier-diagonal Δ_L)".into(),
            ));
        }
        let handle = assemble(ctx, lichnerowicz_id())?;
        let symbol = BlockSymbol::new(&handle)?;
        Ok(ExactFlow { handle, symbol })
    }

    pub fn evolve(&self, h0: &TensorField, t: f64) -> Result<TensorField> {
        self.handle.context().check(h0, Valence::Sym2)?;
        if !(t >= 0.0) {
            return Err(Error::Precondition(format!("flow time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(h0.clone());
        }
        let y = self.symbol.apply_function(&self.handle.from_field(h0), |mu| (-t * mu).exp());
        Ok(self.handle.to_field(&y))
    }
}

pub fn flow_exact(ctx: &ManifoldContext, h0: &TensorField, t: f64) -> Result<TensorField> {
    ExactFlow::new(ctx)?.evolve(h0, t)
}

/// Exact flow sampled at the given increasing times.
pub fn flow_exact_trajectory(ctx: &ManifoldContext, h0: &TensorField, times: &[f64], thin: bool) -> Result<FlowTrajectory> {
    if times.first().is_none_or(|&t| t != 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("times must start at 0 and increase strictly".into()));
    }
    let flow = ExactFlow::new(ctx)?;
    let mut traj = FlowTrajectory::start(ctx, Integrator::SpectralExact, None, thin, h0)?;
    for &t in &times[1..] {
        let h = flow.evolve(h0, t)?;
        traj.record(ctx, t, &h)?;
    }
    Ok(traj)
}

/// Largest stable RK4 step for `Δ_L` on this context.
pub fn rk4_stable_dt(ctx: &ManifoldContext) -> Result<f64> {
    let rho = assemble(ctx, lichnerowicz_id())?.spectral_radius()?;
    // power iteration approaches the radius from below
    let rho = if ctx.flat { rho } else { rho * 1.02 };
    Ok(if rho > 0.0 { RK4_STABILITY / rho } else { f64::INFINITY })
}

/// Classical RK4 for `∂ₜh = -Δ_L h` with the operator applied matrix-free.
pub fn flow_rk4(ctx: &ManifoldContext, h0: &TensorField, dt: f64, steps: usize, thin: bool) -> Result<FlowTrajectory> {
    ctx.check(h0, Valence::Sym2)?;
    if !(dt > 0.0) {
        return Err(Error::Precondition("dt must be positive".into()));
    }
    let limit = rk4_stable_dt(ctx)?;
    if dt > limit {
        return Err(Error::Precondition(format!(
            "dt = {dt:e} exceeds the RK4 stability limit {limit:.4e}; use dt <= {:.4e}",
            0.95 * limit
        )));
    }
    let rhs = |h: &TensorField| -> Result<TensorField> { Ok(lichnerowicz(ctx, h, LichnerowiczVariant::General)?.scaled(-1.0)) };
    let mut traj = FlowTrajectory::start(ctx, Integrator::Rk4, Some(dt), thin, h0)?;
    let mut h = h0.clone();
    for step in 1..=steps {
        let k1 = rhs(&h)?;
        let k2 = rhs(&h.axpy(0.5 * dt, &k1))?;
        let k3 = rhs(&h.axpy(0.5 * dt, &k2))?;
        let k4 = rhs(&h.axpy(dt, &k3))?;
        let incr = k1.add(&k2.scaled(2.0)).add(&k3.scaled(2.0)).add(&k4);
        h = h.axpy(dt / 6.0, &incr);
        traj.record(ctx, step as f64 * dt, &h)?;
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares slope of `log ‖h(t)‖` against `t`, negated.
pub fn fit_decay_rate(traj: &FlowTrajectory) -> Result<DecayFit> {
    let n = traj.times.len();
    if n < 10 {
        return Err(Error::Precondition(format!("decay fit needs at least 10 samples, got {n}")));
    }
    let top = traj.l2_norms.iter().cloned().fold(0.0, f64::max);
    let floor = 1e2 * f64::EPSILON * top;
    if !(top > 0.0) || traj.l2_norms.iter().any(|&v| !(v > floor)) {
        return Err(Error::Precondition(
            "norms reach the roundoff floor; use a shorter horizon".into(),
        ));
    }
    let ys: Vec<f64> = traj.l2_norms.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = reduce::ls_slope(&traj.times, &ys);
    let mean = reduce::mean(&ys);
    let ss_tot = reduce::pairwise_sum(&ys.iter().map(|y| (y - mean).powi(2)).collect::<Vec<_>>());
    let ss_res = reduce::pairwise_sum(
        &traj
            .times
            .iter()
            .zip(&ys)
            .map(|(t, y)| (y - (intercept + slope * t)).powi(2))
            .collect::<Vec<_>>(),
    );
    let r_squared = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        samples: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    pub mu: f64,
    pub label: Vec<i64>,
    pub rate: f64,
    pub rate_relative_error: f64,
    pub r_squared: f64,
    /// `max_t |‖h(t)‖ - e^{-μt}‖h(0)‖| / ‖h(0)‖`
    pub norm_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheckReport {
    pub lambda: f64,
    pub window: SpectralWindowReport,
    pub entries: Vec<DecayEntry>,
    /// Eigenvalues `μ ≤ 0` left out of the check.
    pub excluded_kernel: usize,
    pub all_passed: bool,
}

/// For each distinct positive eigenvalue `μ ≤ mu_max` of `Δ_L` on a flat
/// torus, flows one eigentensor exactly and checks the fitted decay rate.
pub fn eigentensor_decay_check(ctx: &ManifoldContext, mu_max: f64) -> Result<DecayCheckReport> {
    let flow = ExactFlow::new(ctx)?;
    let handle = assemble(ctx, lichnerowicz_id())?;
    let spectrum = full_spectrum(&handle, SpectralBackend::FourierBlock)?;
    let count = spectrum.iter().filter(|&&m| m <= mu_max).count();
    let lambda = ctx.curvature()?.lambda_hat;
    let mut entries = Vec::new();
    let mut excluded = 0;
    if count > 0 {
        let dec = eigensolve_with(&handle, count, f64::NEG_INFINITY, SpectralBackend::FourierBlock)?;
        let mut last: Option<f64> = None;
        for e in &dec.eigenpairs {
            let mu = e.eigenvalue;
            if mu <= 1e-9 {
                excluded += 1;
                continue;
            }
            if last.is_some_and(|l| (mu - l).abs() <= 1e-9 * mu) {
                continue;
            }
            last = Some(mu);
            let horizon = 2.0 / mu;
            let times: Vec<f64> = (0..=10).map(|j| horizon * j as f64 / 10.0).collect();
            let h0 = &e.eigenvector;
            let norm0 = ctx.l2_norm(h0)?;
            let mut traj = FlowTrajectory::start(ctx, Integrator::SpectralExact, None, true, h0)?;
            for &t in &times[1..] {
                traj.record(ctx, t, &flow.evolve(h0, t)?)?;
            }
            let fit = fit_decay_rate(&traj)?;
            let norm_residual = times
                .iter()
                .zip(&traj.l2_norms)
                .map(|(t, n)| (n - (-mu * t).exp() * norm0).abs() / norm0)
                .fold(0.0, f64::max);
            let rel = (fit.rate - mu).abs() / mu;
            entries.push(DecayEntry {
                mu,
                label: e.label.clone(),
                rate: fit.rate,
                rate_relative_error: rel,
                r_squared: fit.r_squared,
                norm_residual,
                passed: rel <= 1e-6,
            });
        }
    }
    let mus: Vec<f64> = entries.iter().map(|e| e.mu).collect();
    let all_passed = entries.iter().all(|e| e.passed);
    Ok(DecayCheckReport {
        lambda,
        window: spectral_window(lambda, &mus),
        entries,
        excluded_kernel: excluded,
        all_passed,
    })
}

#[cfg(test)]
mod tests;
