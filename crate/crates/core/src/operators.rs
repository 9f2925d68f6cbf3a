//! Differential operators on scalars, 1-forms and symmetric 2-tensors.
//!
//! Sign conventions: `(δh)_j = -∇^i h_{ij}`, `δω = -∇^i ω_i`, `Δ = δd ≥ 0`,
//! `∇*∇h = -tr_g ∇²h`, `Δ_H = dδ + δd` on 1-forms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sym_index, sym_pairs, Field, Tensor, TensorField, Valence};
use crate::geometry::{CurvatureBundle, ManifoldContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    Trace,
    Divergence,
    SymDerivative,
    ExteriorD,
    Hessian,
    RoughLaplacian,
    ScalarLaplacian,
    Hodge1form,
    Lichnerowicz,
    RicciComposition,
    LinearizedRicci,
}

/// How the Lichnerowicz Laplacian is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LichnerowiczVariant {
    /// `∇*∇h - 2R̊h + Ric∘h + h∘Ric`.
    General,
    /// `∇*∇h - 2R̊h + 2λ̂h`; needs an Einstein background.
    EinsteinReduced,
    /// `∇*∇h` plus the curvature term read off the commutator of covariant
    /// second derivatives (Ricci identity). Independent of the Riemann sign.
    RicciIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorId {
    pub name: OperatorName,
    pub variant: Option<LichnerowiczVariant>,
}

impl OperatorId {
    pub const fn new(name: OperatorName) -> Self {
        OperatorId { name, variant: None }
    }

    pub const fn lichnerowicz(variant: LichnerowiczVariant) -> Self {
        OperatorId {
            name: OperatorName::Lichnerowicz,
            variant: Some(variant),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.name, self.variant) {
            (OperatorName::Lichnerowicz, _) | (_, None) => Ok(()),
            (name, Some(v)) => Err(Error::Config(format!("variant {v:?} is not valid for {name:?}"))),
        }
    }

    /// Input and output valence.
    pub fn signature(&self) -> (Valence, Valence) {
        use OperatorName::*;
        match self.name {
            Trace => (Valence::Sym2, Valence::Scalar),
            Divergence => (Valence::Sym2, Valence::OneForm),
            SymDerivative => (Valence::OneForm, Valence::Sym2),
            ExteriorD => (Valence::Scalar, Valence::OneForm),
            Hessian => (Valence::Scalar, Valence::Sym2),
            RoughLaplacian | Lichnerowicz | RicciComposition | LinearizedRicci => (Valence::Sym2, Valence::Sym2),
            ScalarLaplacian => (Valence::Scalar, Valence::Scalar),
            Hodge1form => (Valence::OneForm, Valence::OneForm),
        }
    }
}

const NAMES: [(&str, OperatorName); 11] = [
    ("trace", OperatorName::Trace),
    ("divergence", OperatorName::Divergence),
    ("sym_derivative", OperatorName::SymDerivative),
    ("exterior_d", OperatorName::ExteriorD),
    ("hessian", OperatorName::Hessian),
    ("rough_laplacian", OperatorName::RoughLaplacian),
    ("scalar_laplacian", OperatorName::ScalarLaplacian),
    ("hodge_1form", OperatorName::Hodge1form),
    ("lichnerowicz", OperatorName::Lichnerowicz),
    ("ricci_composition", OperatorName::RicciComposition),
    ("linearized_ricci", OperatorName::LinearizedRicci),
];

const VARIANTS: [(&str, LichnerowiczVariant); 3] = [
    ("general", LichnerowiczVariant::General),
    ("einstein_reduced", LichnerowiczVariant::EinsteinReduced),
    ("ricci_identity", LichnerowiczVariant::RicciIdentity),
];

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = NAMES.iter().find(|(_, n)| *n == self.name).map(|(s, _)| *s).unwrap_or("?");
        match self.variant {
            None => f.write_str(name),
            Some(v) => {
                let vs = VARIANTS.iter().find(|(_, x)| *x == v).map(|(s, _)| *s).unwrap_or("?");
                write!(f, "{name}:{vs}")
            }
        }
    }
}

impl FromStr for OperatorId {
    type Err = Error;

    /// `name` or `name:variant`, e.g. `lichnerowicz:einstein_reduced`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, variant) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let name = NAMES
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Config(format!("unknown operator '{name}'")))?;
        let variant = match variant {
            None if name == OperatorName::Lichnerowicz => Some(LichnerowiczVariant::General),
            None => None,
            Some(v) => Some(
                VARIANTS
                    .iter()
                    .find(|(k, _)| *k == v)
                    .map(|(_, x)| *x)
                    .ok_or_else(|| Error::Config(format!("unknown variant '{v}'")))?,
            ),
        };
        let id = OperatorId { name, variant };
        id.validate()?;
        Ok(id)
    }
}

// ---------------------------------------------------------------------------
// covariant derivative machinery

/// Index bookkeeping for contracting a connection into one slot of a rank-r tensor.
struct SlotTable {
    rank: usize,
    n: usize,
    /// `digits[I * rank + s]`
    digits: Vec<usize>,
    /// index of `I` with slot `s` zeroed
    bases: Vec<usize>,
    place: Vec<usize>,
}

impl SlotTable {
    fn new(rank: usize, n: usize) -> Self {
        let size = n.pow(rank as u32);
        let place: Vec<usize> = (0..rank).map(|s| n.pow((rank - 1 - s) as u32)).collect();
        let mut digits = vec![0; size * rank];
        let mut bases = vec![0; size * rank];
        for idx in 0..size {
            for s in 0..rank {
                let d = (idx / place[s]) % n;
                digits[idx * rank + s] = d;
                bases[idx * rank + s] = idx - d * place[s];
            }
        }
        SlotTable {
            rank,
            n,
            digits,
            bases,
            place,
        }
    }
}

/// `(∇T)_{a i_1 .. i_r}` with the derivative index first.
pub(crate) fn nabla(ctx: &ManifoldContext, t: &Tensor) -> Tensor {
    let n = ctx.dim();
    let r = t.rank;
    let size = n.pow(r as u32);
    let parts: Vec<Field> = (0..n).map(|a| ctx.diff.diff(&t.f, a)).collect();
    let conn = ctx.connection();
    let table = SlotTable::new(r, n);
    let f = Field::from_points(ctx.npts(), n * size, |p, o| {
        let gam = conn.at(p);
        let tv = t.f.at(p);
        for a in 0..n {
            let da = parts[a].at(p);
            for idx in 0..size {
                let mut v = da[idx];
                for s in 0..table.rank {
                    let i = table.digits[idx * r + s];
                    let base = table.bases[idx * r + s];
                    let pl = table.place[s];
                    for c in 0..table.n {
                        v -= gam[(c * n + a) * n + i] * tv[base + c * pl];
                    }
                }
                o[a * size + idx] = v;
            }
        }
    });
    Tensor { rank: r + 1, n, f }
}

/// Contracts slots `s1 < s2` of a full tensor with `g^{..}`.
pub(crate) fn contract(ctx: &ManifoldContext, t: &Tensor, s1: usize, s2: usize) -> Tensor {
    assert!(s1 < s2 && s2 < t.rank);
    let n = t.n;
    let r = t.rank;
    let out_rank = r - 2;
    let out_size = n.pow(out_rank as u32);
    let gi = &ctx.metric.g_inv.values;
    let place: Vec<usize> = (0..r).map(|s| n.pow((r - 1 - s) as u32)).collect();
    // map output multi-index -> input base index
    let bases: Vec<usize> = (0..out_size)
        .map(|o| {
            let mut rem = o;
            let mut digits = vec![0; out_rank];
            for s in (0..out_rank).rev() {
                digits[s] = rem % n;
                rem /= n;
            }
            let mut k = 0;
            let mut base = 0;
            for s in 0..r {
                if s == s1 || s == s2 {
                    continue;
                }
                base += digits[k] * place[s];
                k += 1;
            }
            base
        })
        .collect();
    let f = Field::from_points(ctx.npts(), out_size, |p, o| {
        let inv = gi.at(p);
        let tv = t.f.at(p);
        for (oi, &base) in bases.iter().enumerate() {
            let mut v = 0.0;
            for a in 0..n {
                for b in 0..n {
                    v += inv[sym_index(n, a, b)] * tv[base + a * place[s1] + b * place[s2]];
                }
            }
            o[oi] = v;
        }
    });
    Tensor { rank: out_rank, n, f }
}

fn sym2_from_full(ctx: &ManifoldContext, t: &Tensor) -> TensorField {
    t.to_sym2(ctx.id())
}

// ---------------------------------------------------------------------------
// public operators

/// `tr_g h = g^{ij} h_{ij}`.
pub fn trace(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    ctx.check(h, Valence::Sym2)?;
    let n = ctx.dim();
    let gi = &ctx.metric.g_inv.values;
    let vals = Field::from_points(ctx.npts(), 1, |p, o| {
        let inv = gi.at(p);
        let hv = h.at(p);
        let mut s = 0.0;
        for (k, &(i, j)) in sym_pairs(n).iter().enumerate() {
            let w = if i == j { 1.0 } else { 2.0 };
            s += w * inv[k] * hv[sym_index(n, i, j)];
        }
        o[0] = s;
    });
    Ok(ctx.field(Valence::Scalar, vals))
}

/// `h = h0 + (u / n) g` with `u = tr_g h`.
pub fn trace_split(ctx: &ManifoldContext, h: &TensorField) -> Result<(TensorField, TensorField)> {
    let u = trace(ctx, h)?;
    let n = ctx.dim() as f64;
    let g = &ctx.metric.g.values;
    let h0 = Field::from_points(ctx.npts(), h.values.ncomp, |p, o| {
        let s = u.at(p)[0] / n;
        for (c, v) in o.iter_mut().enumerate() {
            *v = h.at(p)[c] - s * g.at(p)[c];
        }
    });
    Ok((ctx.field(Valence::Sym2, h0), u))
}

/// `f g` for a scalar `f`.
pub fn scalar_times_metric(ctx: &ManifoldContext, f: &TensorField) -> Result<TensorField> {
    ctx.check(f, Valence::Scalar)?;
    let g = &ctx.metric.g.values;
    let vals = Field::from_points(ctx.npts(), g.ncomp, |p, o| {
        for (c, v) in o.iter_mut().enumerate() {
            *v = f.at(p)[0] * g.at(p)[c];
        }
    });
    Ok(ctx.field(Valence::Sym2, vals))
}

/// `df`.
pub fn exterior_d(ctx: &ManifoldContext, f: &TensorField) -> Result<TensorField> {
    ctx.check(f, Valence::Scalar)?;
    let n = ctx.dim();
    let parts: Vec<Field> = (0..n).map(|a| ctx.diff.diff(&f.values, a)).collect();
    let vals = Field::from_points(ctx.npts(), n, |p, o| {
        for a in 0..n {
            o[a] = parts[a].at(p)[0];
        }
    });
    Ok(ctx.field(Valence::OneForm, vals))
}

/// `(δh)_j = -g^{ai} ∇_a h_{ij}`.
pub fn divergence(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    ctx.check(h, Valence::Sym2)?;
    let nh = nabla(ctx, &Tensor::from_sym2(h));
    let mut c = contract(ctx, &nh, 0, 1);
    c.f = c.f.scaled(-1.0);
    Ok(c.to_one_form(ctx.id()))
}

/// `δω = -g^{ai} ∇_a ω_i`.
pub fn codifferential(ctx: &ManifoldContext, w: &TensorField) -> Result<TensorField> {
    ctx.check(w, Valence::OneForm)?;
    let nw = nabla(ctx, &Tensor::from_one_form(w));
    let mut c = contract(ctx, &nw, 0, 1);
    c.f = c.f.scaled(-1.0);
    Ok(c.to_scalar(ctx.id()))
}

/// `(δ*ω)_{ij} = (∇_i ω_j + ∇_j ω_i) / 2`.
pub fn sym_derivative(ctx: &ManifoldContext, w: &TensorField) -> Result<TensorField> {
    ctx.check(w, Valence::OneForm)?;
    let nw = nabla(ctx, &Tensor::from_one_form(w));
    Ok(sym2_from_full(ctx, &nw))
}

/// `∇df`.
pub fn hessian(ctx: &ManifoldContext, f: &TensorField) -> Result<TensorField> {
    let df = exterior_d(ctx, f)?;
    let h = nabla(ctx, &Tensor::from_one_form(&df));
    Ok(sym2_from_full(ctx, &h))
}

/// `Δf = δdf`.
pub fn scalar_laplacian(ctx: &ManifoldContext, f: &TensorField) -> Result<TensorField> {
    codifferential(ctx, &exterior_d(ctx, f)?)
}

/// `(dω)_{ij} = ∂_i ω_j - ∂_j ω_i` as a full rank-2 tensor.
fn exterior_d_1form(ctx: &ManifoldContext, w: &TensorField) -> Tensor {
    let n = ctx.dim();
    let parts: Vec<Field> = (0..n).map(|a| ctx.diff.diff(&w.values, a)).collect();
    let f = Field::from_points(ctx.npts(), n * n, |p, o| {
        for i in 0..n {
            for j in 0..n {
                o[i * n + j] = parts[i].at(p)[j] - parts[j].at(p)[i];
            }
        }
    });
    Tensor { rank: 2, n, f }
}

/// `Δ_H ω = dδω + δdω`, with `(δβ)_j = -∇^i β_{ij}` on 2-forms.
pub fn hodge_1form(ctx: &ManifoldContext, w: &TensorField) -> Result<TensorField> {
    ctx.check(w, Valence::OneForm)?;
    let d_delta = exterior_d(ctx, &codifferential(ctx, w)?)?;
    let dw = exterior_d_1form(ctx, w);
    let ndw = nabla(ctx, &dw);
    let mut delta_d = contract(ctx, &ndw, 0, 1);
    delta_d.f = delta_d.f.scaled(-1.0);
    Ok(d_delta.add(&delta_d.to_one_form(ctx.id())))
}

/// Full covariant Hessian `(∇∇h)_{abij}` of a sym2 field.
fn second_covariant(ctx: &ManifoldContext, h: &TensorField) -> Tensor {
    nabla(ctx, &nabla(ctx, &Tensor::from_sym2(h)))
}

fn rough_from_second(ctx: &ManifoldContext, nn: &Tensor) -> TensorField {
    let mut c = contract(ctx, nn, 0, 1);
    c.f = c.f.scaled(-1.0);
    sym2_from_full(ctx, &c)
}

/// `∇*∇h = -g^{ab} ∇_a ∇_b h`.
pub fn rough_laplacian(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    ctx.check(h, Valence::Sym2)?;
    Ok(rough_from_second(ctx, &second_covariant(ctx, h)))
}

/// `Ric∘h + h∘Ric - 2R̊h` from the Ricci identity:
/// `g^{ai}(C_{abij} + C_{ajib})` with `C_{abij} = ∇_a∇_b h_{ij} - ∇_b∇_a h_{ij}`.
fn commutator_curvature_term(ctx: &ManifoldContext, nn: &Tensor) -> TensorField {
    let n = ctx.dim();
    let gi = &ctx.metric.g_inv.values;
    let idx = |a: usize, b: usize, i: usize, j: usize| ((a * n + b) * n + i) * n + j;
    let vals = Field::from_points(ctx.npts(), n * (n + 1) / 2, |p, o| {
        let t = nn.f.at(p);
        let inv = gi.at(p);
        let c = |a, b, i, j| t[idx(a, b, i, j)] - t[idx(b, a, i, j)];
        for (k, &(b, j)) in sym_pairs(n).iter().enumerate() {
            let mut v = 0.0;
            for a in 0..n {
                for i in 0..n {
                    v += inv[sym_index(n, a, i)] * (c(a, b, i, j) + c(a, j, i, b));
                }
            }
            o[k] = v;
        }
    });
    ctx.field(Valence::Sym2, vals)
}

/// Relative Einstein residual above which the reduced Lichnerowicz variant is refused.
pub fn einstein_threshold(ctx: &ManifoldContext) -> f64 {
    10.0 * ctx.diff_tolerance()
}

pub(crate) fn lichnerowicz_with(
    ctx: &ManifoldContext,
    curv: &CurvatureBundle,
    h: &TensorField,
    variant: LichnerowiczVariant,
) -> Result<TensorField> {
    ctx.check(h, Valence::Sym2)?;
    let nn = second_covariant(ctx, h);
    let rough = rough_from_second(ctx, &nn);
    match variant {
        LichnerowiczVariant::RicciIdentity => Ok(rough.add(&commutator_curvature_term(ctx, &nn))),
        LichnerowiczVariant::General => {
            let rk = curv.second_kind_apply(ctx, h)?;
            let rc = curv.ricci_compose(ctx, h)?;
            Ok(rough.axpy(-2.0, &rk).add(&rc))
        }
        LichnerowiczVariant::EinsteinReduced => {
            let scale = curv.lambda_hat.abs().max(1.0);
            let rel = curv.einstein_residual_sup / scale;
            if !(rel <= einstein_threshold(ctx)) {
                return Err(Error::Precondition(format!(
                    "einstein_reduced Lichnerowicz needs an Einstein background; relative residual {rel:.3e} exceeds {:.3e}",
                    einstein_threshold(ctx)
                )));
            }
            let rk = curv.second_kind_apply(ctx, h)?;
            Ok(rough.axpy(-2.0, &rk).axpy(2.0 * curv.lambda_hat, h))
        }
    }
}

/// Lichnerowicz Laplacian.
pub fn lichnerowicz(ctx: &ManifoldContext, h: &TensorField, variant: LichnerowiczVariant) -> Result<TensorField> {
    let curv = ctx.curvature()?;
    lichnerowicz_with(ctx, curv, h, variant)
}

/// `½(Δ_L h - 2δ*δh - ∇d(tr h))`.
pub fn linearized_ricci_formula(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    let lh = lichnerowicz(ctx, h, LichnerowiczVariant::General)?;
    let gauge = gauge_term(ctx, h)?;
    Ok(lh.add(&gauge).scaled(0.5))
}

/// `-2δ*δh - ∇d(tr h)`, which vanishes for Chen-Nagano tensors.
pub fn gauge_term(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    let sdd = sym_derivative(ctx, &divergence(ctx, h)?)?;
    let hess = hessian(ctx, &trace(ctx, h)?)?;
    Ok(sdd.scaled(-2.0).sub(&hess))
}

/// `(Ric(g + εh) - Ric(g - εh)) / 2ε`, recomputing the curvature pipeline.
pub fn linearized_ricci_gateaux(ctx: &ManifoldContext, h: &TensorField, eps: f64) -> Result<TensorField> {
    ctx.check(h, Valence::Sym2)?;
    if !(eps > 0.0) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    let sign = ctx.curvature()?.riemann_sign;
    let ric_at = |s: f64| -> Result<Field> {
        let g = ctx.metric.g.values.axpy(s, &h.values);
        let pert = ctx.with_metric(g).map_err(|e| match e {
            Error::NotPositiveDefinite { index, coords, .. } => Error::Precondition(format!(
                "g {} eps*h is not positive-definite at sample {index} (x = {coords:?}); use a smaller eps",
                if s > 0.0 { "+" } else { "-" }
            )),
            other => other,
        })?;
        Ok(CurvatureBundle::compute(&pert, sign).ricci.values)
    };
    let plus = ric_at(eps)?;
    let minus = ric_at(-eps)?;
    Ok(ctx.field(Valence::Sym2, plus.sub(&minus).scaled(0.5 / eps)))
}

/// Applies an operator by id.
pub fn apply(ctx: &ManifoldContext, op: OperatorId, f: &TensorField) -> Result<TensorField> {
    op.validate()?;
    let (input, _) = op.signature();
    ctx.check(f, input)?;
    use OperatorName::*;
    match op.name {
        Trace => trace(ctx, f),
        Divergence => divergence(ctx, f),
        SymDerivative => sym_derivative(ctx, f),
        ExteriorD => exterior_d(ctx, f),
        Hessian => hessian(ctx, f),
        RoughLaplacian => rough_laplacian(ctx, f),
        ScalarLaplacian => scalar_laplacian(ctx, f),
        Hodge1form => hodge_1form(ctx, f),
        Lichnerowicz => lichnerowicz(ctx, f, op.variant.unwrap_or(LichnerowiczVariant::General)),
        RicciComposition => ctx.curvature()?.ricci_compose(ctx, f),
        LinearizedRicci => linearized_ricci_formula(ctx, f),
    }
}

#[cfg(test)]
mod tests;
