//! Experiments that decide between inconsistent statements instead of
//! assuming one.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{cases, check_resolutions, log_slope};
use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::geometry::{convention_pin, make_model, ConventionPin, CurvatureBundle, ManifoldContext};
use crate::operators::{divergence, hodge_1form, lichnerowicz_with, trace_split, LichnerowiczVariant, OperatorId};
use crate::spectral::{assemble, bochner_koiso_report, eigensolve, rayleigh, BochnerKoisoReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub id: String,
    pub question: String,
    pub verdict: String,
    /// The statement the evidence supports, when one does.
    pub chosen: Option<String>,
    /// `false` only when the experiment failed to separate the candidates.
    pub conclusive: bool,
    pub evidence: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutationCandidate {
    /// `δ(Δ_L h) = Δ_H(δh)`
    Plain,
    /// `δ(Δ_L h) = Δ_H(δh) - 2λδh`
    Shifted,
}

impl CommutationCandidate {
    pub fn statement(self) -> &'static str {
        match self {
            CommutationCandidate::Plain => "δ(Δ_L h) = Δ_H(δh)",
            CommutationCandidate::Shifted => "δ(Δ_L h) = Δ_H(δh) - 2λδh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateHistory {
    /// `sup |residual|` per resolution (absolute).
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub converges: bool,
    /// Finest residual at or above the stall level.
    pub stalls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationSample {
    pub seed: u64,
    /// `sup |δh|` per resolution.
    pub delta_h_sup: Vec<f64>,
    /// `0.5 · |2λ| · sup |δh|` at the finest resolution.
    pub stall_level: f64,
    pub plain: CandidateHistory,
    pub shifted: CandidateHistory,
    pub winner: Option<CommutationCandidate>,
}

const COMMUTATION_QUESTION: &str =
    "Does δ(Δ_L h) equal Δ_H(δh), or Δ_H(δh) - 2λδh, on an Einstein manifold with constant λ?";

/// Runs the commutation experiment under the process-wide convention pin.
pub fn adjudicate_commutation(cfg: &ModelConfig, resolutions: &[usize], samples: usize, seed: u64) -> Result<Adjudication> {
    adjudicate_commutation_with_pin(cfg, resolutions, samples, seed, convention_pin()?)
}

/// Same experiment with an explicit Riemann sign; a wrong sign is a negative
/// control that must come out inconclusive.
pub fn adjudicate_commutation_with_pin(
    cfg: &ModelConfig,
    resolutions: &[usize],
    samples: usize,
    seed: u64,
    pin: &ConventionPin,
) -> Result<Adjudication> {
    check_resolutions(resolutions)?;
    if samples == 0 {
        return Err(Error::Config("at least one sample is needed".into()));
    }
    let mut spacings = Vec::new();
    let mut lambdas = Vec::new();
    let mut plain = vec![Vec::new(); samples];
    let mut shifted = vec![Vec::new(); samples];
    let mut dh_sup = vec![Vec::new(); samples];
    let mut order = cfg.stencil_order;
    for (ri, &r) in resolutions.iter().enumerate() {
        let ctx = make_model(&cfg.clone().with_resolution(r))?;
        let lambda_exact = ctx.exact_einstein.ok_or_else(|| {
            Error::Precondition(format!("the commutation experiment needs an Einstein model, got {}", ctx.model_name))
        })?;
        if ri == 0 && lambda_exact == 0.0 {
            return Ok(Adjudication {
                id: "commutation".into(),
                question: COMMUTATION_QUESTION.into(),
                verdict: "indistinguishable at λ = 0: both candidates are the same expression".into(),
                chosen: None,
                conclusive: true,
                evidence: json!({ "model": ctx.model_name, "lambda": 0.0 }),
            });
        }
        if ctx.is_spectral() {
            order = usize::MAX;
        }
        let owned;
        let curv: &CurvatureBundle = if pin.riemann_sign == convention_pin()?.riemann_sign {
            ctx.curvature()?
        } else {
            owned = CurvatureBundle::compute(&ctx, pin.riemann_sign);
            &owned
        };
        let lambda = curv.lambda_hat;
        spacings.push(ctx.spacing());
        lambdas.push(lambda);
        for s in 0..samples {
            let h = cases::inputs(&ctx, seed + s as u64).sym2(&ctx);
            let dh = divergence(&ctx, &h)?;
            let lh = lichnerowicz_with(&ctx, curv, &h, LichnerowiczVariant::General)?;
            let a = divergence(&ctx, &lh)?.sub(&hodge_1form(&ctx, &dh)?);
            let b = a.axpy(2.0 * lambda, &dh);
            plain[s].push(ctx.sup_norm(&a));
            shifted[s].push(ctx.sup_norm(&b));
            dh_sup[s].push(ctx.sup_norm(&dh));
        }
    }
    let lambda_fine = *lambdas.last().expect("resolutions");
    let history = |res: Vec<f64>, stall: f64| {
        let slope = log_slope(&spacings, &res);
        let floor = res.iter().all(|&r| r <= 1e-11);
        let converges = floor || (order != usize::MAX && slope >= order as f64 - 0.5);
        let stalls = *res.last().expect("resolutions") >= stall;
        CandidateHistory {
            residuals: res,
            slope,
            converges,
            stalls,
        }
    };
    let mut records = Vec::new();
    for s in 0..samples {
        let stall = 0.5 * (2.0 * lambda_fine).abs() * dh_sup[s].last().copied().unwrap_or(0.0);
        let p = history(plain[s].clone(), stall);
        let q = history(shifted[s].clone(), stall);
        let winner = match (p.converges, q.converges) {
            (true, false) if q.stalls => Some(CommutationCandidate::Plain),
            (false, true) if p.stalls => Some(CommutationCandidate::Shifted),
            _ => None,
        };
        records.push(CommutationSample {
            seed: seed + s as u64,
            delta_h_sup: dh_sup[s].clone(),
            stall_level: stall,
            plain: p,
            shifted: q,
            winner,
        });
    }
    let first = records[0].winner;
    let agreed = first.filter(|w| records.iter().all(|r| r.winner == Some(*w)));
    let verdict = match agreed {
        Some(w) => {
            let other = match w {
                CommutationCandidate::Plain => CommutationCandidate::Shifted,
                CommutationCandidate::Shifted => CommutationCandidate::Plain,
            };
            format!(
                "{} converges under refinement for every sample; {} stalls at about 2|λ|·sup|δh|",
                w.statement(),
                other.statement()
            )
        }
        None => "inconclusive: the samples do not single out one candidate".to_string(),
    };
    Ok(Adjudication {
        id: "commutation".into(),
        question: COMMUTATION_QUESTION.into(),
        verdict,
        chosen: agreed.map(|w| w.statement().to_string()),
        conclusive: agreed.is_some(),
        evidence: json!({
            "model": cfg.model.name(),
            "dim": cfg.dim,
            "stencil_order": cfg.stencil_order,
            "riemann_sign": pin.riemann_sign,
            "resolutions": resolutions,
            "spacings": spacings,
            "lambda_hat": lambdas,
            "samples": records,
        }),
    })
}

const BOCHNER_KOISO_QUESTION: &str =
    "Does ∫|∇h₀|² = ∫|δh₀|² + ∫⟨R̊h₀, h₀⟩ + λ∫|h₀|² hold for every trace-free h₀?";

/// Trace-free part of `sin(2πx¹)(dx¹⊗dx¹ - dx²⊗dx²)`.
pub(crate) fn sine_counterexample(ctx: &ManifoldContext) -> Result<crate::field::TensorField> {
    let h = ctx.sym2_from_fn(|x, m| {
        let s = (2.0 * PI * x[0]).sin();
        let n = x.len();
        m[0] = s;
        m[n + 1] = -s;
    });
    Ok(trace_split(ctx, &h)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResidualStats {
    count: usize,
    min: f64,
    max: f64,
    mean: f64,
    /// `residual / ∫|∇h₀|²`
    max_relative: f64,
}

/// Evaluates the stated identity on the sine counterexample, a constant
/// trace-free field, random trace-free fields and (on flat tori) trace-free
/// Lichnerowicz eigentensors. Reports only.
pub fn adjudicate_bochner_koiso(ctx: &ManifoldContext, samples: usize, seed: u64) -> Result<Adjudication> {
    if !ctx.is_torus() {
        return Err(Error::Unsupported("the Bochner-Koiso ledger needs a torus backend".into()));
    }
    let lap = OperatorId::lichnerowicz(LichnerowiczVariant::General);
    let mu_of = |h: &crate::field::TensorField| -> Result<Option<f64>> {
        Ok(if ctx.flat { Some(rayleigh(ctx, lap, h)?) } else { None })
    };
    let sine = sine_counterexample(ctx)?;
    let sine_report = bochner_koiso_report(ctx, &sine, mu_of(&sine)?)?;
    let constant = {
        let n = ctx.dim();
        let c = ctx.sym2_from_fn(|_, m| {
            m[1] = 1.0;
            m[n] = 1.0;
        });
        trace_split(ctx, &c)?.0
    };
    let constant_report = bochner_koiso_report(ctx, &constant, mu_of(&constant)?)?;
    let mut residuals = Vec::new();
    let mut relative = Vec::new();
    for s in 0..samples {
        let h = cases::inputs(ctx, seed + s as u64).sym2(ctx);
        let h0 = trace_split(ctx, &h)?.0;
        let rep = bochner_koiso_report(ctx, &h0, None)?;
        residuals.push(rep.stated_residual);
        relative.push(rep.stated_residual / rep.stated_lhs.abs().max(f64::MIN_POSITIVE));
    }
    let stats = (!residuals.is_empty()).then(|| ResidualStats {
        count: residuals.len(),
        min: residuals.iter().cloned().fold(f64::INFINITY, f64::min),
        max: residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean: crate::reduce::mean(&residuals),
        max_relative: relative.iter().map(|v| v.abs()).fold(0.0, f64::max),
    });
    let mut eigen_reports: Vec<BochnerKoisoReport> = Vec::new();
    if ctx.flat {
        let handle = assemble(ctx, lap)?;
        let dec = eigensolve(&handle, 6, 4.0 * PI * PI)?;
        for e in &dec.eigenpairs {
            let h0 = trace_split(ctx, &e.eigenvector)?.0;
            if ctx.l2_norm(&h0)? > 1e-6 {
                eigen_reports.push(bochner_koiso_report(ctx, &h0, Some(e.eigenvalue))?);
            }
        }
    }
    let r = sine_report.stated_residual;
    let fails = r.abs() > 1e-6 * sine_report.stated_lhs.abs().max(1.0);
    let verdict = if fails {
        format!(
            "the stated identity fails for trace-free h₀ with δh₀ ≠ 0: residual {r:.10} on the sine field, where ∫|∇h₀|² = {:.10} and ∫|δh₀|² = {:.10}",
            sine_report.ledger.grad_energy, sine_report.ledger.div_energy
        )
    } else {
        format!("no violation on the sine field (residual {r:.3e})")
    };
    Ok(Adjudication {
        id: "bochner_koiso".into(),
        question: BOCHNER_KOISO_QUESTION.into(),
        verdict,
        chosen: None,
        conclusive: true,
        evidence: json!({
            "model": ctx.model_name,
            "resolution": ctx.config.resolution,
            "sine_field": sine_report,
            "constant_field": constant_report,
            "random_fields": stats,
            "random_residuals": residuals,
            "eigentensors": eigen_reports,
        }),
    })
}

/// Pointwise range of R̊ on trace-free tensors of a constant-curvature chart,
/// set against the expectation that R̊ is nonpositive at negative curvature.
pub fn adjudicate_second_kind_sign(ctx: &ManifoldContext) -> Result<Option<Adjudication>> {
    let lambda = match ctx.exact_einstein {
        Some(l) if l != 0.0 && !ctx.is_torus() => l,
        _ => return Ok(None),
    };
    let n = ctx.dim() as f64;
    let k = lambda / (n - 1.0);
    let curv = ctx.curvature()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in ctx.interior() {
        let ev = curv.second_kind_spectrum(ctx, p)?;
        lo = lo.min(ev[0]);
        hi = hi.max(ev[ev.len() - 1]);
    }
    let negative = ctx.config.model != ModelKind::SphereStereo;
    let verdict = if negative && lo > 0.0 {
        format!(
            "R̊ is positive, not ≤ 0, on trace-free tensors at sectional curvature {k}: eigenvalues in [{lo:.6}, {hi:.6}] under the pinned Riemann sign"
        )
    } else if negative {
        format!("R̊ ≤ 0 on trace-free tensors at sectional curvature {k}: eigenvalues in [{lo:.6}, {hi:.6}]")
    } else {
        format!("R̊ acts on trace-free tensors with eigenvalues in [{lo:.6}, {hi:.6}] at sectional curvature {k}")
    };
    Ok(Some(Adjudication {
        id: "second_kind_sign".into(),
        question: "Is the curvature operator of the second kind nonpositive on negatively curved Einstein models?".into(),
        verdict,
        chosen: Some(format!("R̊h₀ = {}·h₀ for trace-free h₀", -k * curv.riemann_sign.abs())),
        conclusive: true,
        evidence: json!({
            "model": ctx.model_name,
            "sectional_curvature": k,
            "riemann_sign": curv.riemann_sign,
            "eigenvalue_min": lo,
            "eigenvalue_max": hi,
        }),
    }))
}
