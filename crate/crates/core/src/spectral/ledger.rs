//! Integral ledgers for trace-free tensors: both sides of the Bochner-Koiso
//! identity as stated and of the eigenvalue bound derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sym_index, Tensor, TensorField, Valence};
use crate::geometry::ManifoldContext;
use crate::operators::{divergence, lichnerowicz, nabla, rough_laplacian, trace, LichnerowiczVariant};
use crate::reduce;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralLedger {
    /// `∫|∇h₀|² dV` by quadrature of the pointwise norm.
    pub grad_energy: f64,
    /// `∫⟨∇*∇h₀, h₀⟩ dV`, the same quantity after integration by parts.
    pub grad_energy_by_parts: f64,
    pub div_energy: f64,
    pub curvature_pairing: f64,
    pub l2_norm_sq: f64,
    pub lambda: f64,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BochnerKoisoReport {
    pub ledger: IntegralLedger,
    /// `∫|∇h₀|²`
    pub stated_lhs: f64,
    /// `∫|δh₀|² + ∫⟨R̊h₀, h₀⟩ + λ∫|h₀|²`
    pub stated_rhs: f64,
    pub stated_residual: f64,
    /// `(μ - 3λ)∫|h₀|²`
    pub derived_lhs: Option<f64>,
    /// `∫|δh₀|² - ∫⟨R̊h₀, h₀⟩`
    pub derived_rhs: Option<f64>,
    pub derived_residual: Option<f64>,
}

/// `|T|²_g` of a full rank-3 tensor at sample `p`.
fn rank3_norm_sq(n: usize, gi: &[f64], t: &[f64]) -> f64 {
    let g = |a: usize, b: usize| gi[sym_index(n, a, b)];
    let idx = |a: usize, i: usize, j: usize| (a * n + i) * n + j;
    // raise all three indices, then pair
    let mut up = vec![0.0; n * n * n];
    for a in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for b in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            v += g(a, b) * g(i, k) * g(j, l) * t[idx(b, k, l)];
                        }
                    }
                }
                up[idx(a, i, j)] = v;
            }
        }
    }
    up.iter().zip(t).map(|(a, b)| a * b).sum()
}

fn check_trace_free(ctx: &ManifoldContext, h0: &TensorField) -> Result<()> {
    let scale = ctx.sup_norm(h0);
    let tr = ctx.sup(&trace(ctx, h0)?);
    if tr > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!(
            "tensor is not trace-free (sup |tr h| = {tr:.3e}, sup |h| = {scale:.3e})"
        )));
    }
    Ok(())
}

/// Evaluates every integral of the Bochner-Koiso computation; asserts nothing.
pub fn bochner_koiso_report(ctx: &ManifoldContext, h0: &TensorField, mu: Option<f64>) -> Result<BochnerKoisoReport> {
    ctx.check(h0, Valence::Sym2)?;
    if !ctx.is_torus() {
        return Err(Error::Unsupported("integral ledgers need a torus backend".into()));
    }
    check_trace_free(ctx, h0)?;
    let curv = ctx.curvature()?;
    let n = ctx.dim();
    let w = ctx.quadrature_weights.as_ref().expect("torus weights");
    let grad = nabla(ctx, &Tensor::from_sym2(h0));
    let terms: Vec<f64> = (0..ctx.npts())
        .map(|p| w[p] * rank3_norm_sq(n, ctx.metric.g_inv.at(p), grad.f.at(p)))
        .collect();
    let grad_energy = reduce::pairwise_sum(&terms);
    let grad_energy_by_parts = ctx.l2_inner(&rough_laplacian(ctx, h0)?, h0)?;
    let dh = divergence(ctx, h0)?;
    let div_energy = ctx.l2_inner(&dh, &dh)?;
    let curvature_pairing = ctx.l2_inner(&curv.second_kind_apply(ctx, h0)?, h0)?;
    let l2_norm_sq = ctx.l2_inner(h0, h0)?;
    let lambda = curv.lambda_hat;
    let stated_rhs = div_energy + curvature_pairing + lambda * l2_norm_sq;
    let derived_lhs = mu.map(|m| (m - 3.0 * lambda) * l2_norm_sq);
    let derived_rhs = mu.map(|_| div_energy - curvature_pairing);
    Ok(BochnerKoisoReport {
        ledger: IntegralLedger {
            grad_energy,
            grad_energy_by_parts,
            div_energy,
            curvature_pairing,
            l2_norm_sq,
            lambda,
            mu,
        },
        stated_lhs: grad_energy,
        stated_rhs,
        stated_residual: grad_energy - stated_rhs,
        derived_residual: derived_lhs.zip(derived_rhs).map(|(a, b)| a - b),
        derived_lhs,
        derived_rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub mu: f64,
    pub lambda: f64,
    pub three_lambda: f64,
    pub second_kind_min: f64,
    pub second_kind_max: f64,
    /// `μ ≥ 3λ` up to a relative `1e-9`.
    pub holds: bool,
    /// `‖Δ_L h₀ - μ h₀‖ / ‖h₀‖`.
    pub eigen_residual: f64,
}

/// Checks the lower bound `μ ≥ 3λ` for an eigenpair together with the
/// pointwise range of the second-kind curvature operator.
pub fn lower_bound_report(ctx: &ManifoldContext, h0: &TensorField, mu: f64) -> Result<LowerBoundReport> {
    ctx.check(h0, Valence::Sym2)?;
    if !ctx.is_torus() {
        return Err(Error::Unsupported(
            "no global report on open charts; use the pointwise second-kind spectrum".into(),
        ));
    }
    let lh = lichnerowicz(ctx, h0, LichnerowiczVariant::General)?;
    let norm = ctx.l2_norm(h0)?;
    if !(norm > 0.0) {
        return Err(Error::Precondition("zero tensor".into()));
    }
    let eigen_residual = ctx.l2_norm(&lh.axpy(-mu, h0))? / norm;
    if eigen_residual > 1e-6 * mu.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "not an eigenpair: relative residual {eigen_residual:.3e}"
        )));
    }
    let curv = ctx.curvature()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in ctx.interior() {
        let ev = curv.second_kind_spectrum(ctx, p)?;
        lo = lo.min(ev[0]);
        hi = hi.max(ev[ev.len() - 1]);
    }
    let lambda = curv.lambda_hat;
    let three_lambda = 3.0 * lambda;
    Ok(LowerBoundReport {
        mu,
        lambda,
        three_lambda,
        second_kind_min: lo,
        second_kind_max: hi,
        holds: mu >= three_lambda - 1e-9 * mu.abs().max(1.0),
        eigen_residual,
    })
}
