//! Divergence-form discretizations behind assembled torus operators.
//!
//! Each second-order operator `L` is applied through its energy form,
//! `Σ_p w_p ⟨L h, k⟩ = Σ_p w_p ⟨D h, D k⟩`, with `D` the discrete first-order
//! operator and the periodic derivative moved across by exact skew-symmetry.
//! The result is symmetric in the discrete L² pairing to roundoff on every
//! torus, flat or not; the strong forms in `operators` agree with it up to
//! discretization error.

use crate::error::{Error, Result};
use crate::field::{sym_index, sym_pairs, Field, Tensor, TensorField, Valence};
use crate::geometry::ManifoldContext;
use crate::operators::{apply, codifferential, einstein_threshold, nabla, LichnerowiczVariant, OperatorId, OperatorName};

fn weights(ctx: &ManifoldContext) -> &[f64] {
    ctx.quadrature_weights.as_ref().expect("torus has weights")
}

/// `Σ_a ∂_a V^{a·}` for a field whose components are `(a, rest)` row-major.
fn divergence_of_leading(ctx: &ManifoldContext, v: &Field, rest: usize) -> Field {
    let n = ctx.dim();
    let parts: Vec<Field> = (0..n).map(|a| ctx.diff.diff(v, a)).collect();
    Field::from_points(ctx.npts(), rest, |p, o| {
        for (r, out) in o.iter_mut().enumerate() {
            *out = (0..n).map(|a| parts[a].at(p)[a * rest + r]).sum();
        }
    })
}

/// `-(1/w) ∂_a(w g^{ab} ∂_b f)`.
fn scalar_laplacian(ctx: &ManifoldContext, f: &TensorField) -> TensorField {
    let n = ctx.dim();
    let w = weights(ctx);
    let gi = &ctx.metric.g_inv.values;
    let grads: Vec<Field> = (0..n).map(|b| ctx.diff.diff(&f.values, b)).collect();
    let flux = Field::from_points(ctx.npts(), n, |p, o| {
        let inv = gi.at(p);
        for a in 0..n {
            o[a] = w[p] * (0..n).map(|b| inv[sym_index(n, a, b)] * grads[b].at(p)[0]).sum::<f64>();
        }
    });
    let div = divergence_of_leading(ctx, &flux, 1);
    let vals = Field::from_points(ctx.npts(), 1, |p, o| o[0] = -div.at(p)[0] / w[p]);
    ctx.field(Valence::Scalar, vals)
}

/// Lowers a vector density `E^b / w` to a 1-form.
fn lower_density(ctx: &ManifoldContext, e: &Field) -> TensorField {
    let n = ctx.dim();
    let w = weights(ctx);
    let g = &ctx.metric.g.values;
    let vals = Field::from_points(ctx.npts(), n, |p, o| {
        let gm = g.at(p);
        for c in 0..n {
            o[c] = (0..n).map(|b| gm[sym_index(n, c, b)] * e.at(p)[b]).sum::<f64>() / w[p];
        }
    });
    ctx.field(Valence::OneForm, vals)
}

/// Energy `‖δω‖² + ‖dω‖²` on 1-forms.
fn hodge(ctx: &ManifoldContext, w1: &TensorField) -> Result<TensorField> {
    let n = ctx.dim();
    let w = weights(ctx);
    let gi = &ctx.metric.g_inv.values;
    let conn = ctx.connection();
    let s = codifferential(ctx, w1)?;
    // dδ part: E^b = ∂_a(w s g^{ab}) + w s g^{ac} Γ^b_{ac}
    let u = Field::from_points(ctx.npts(), n * n, |p, o| {
        let inv = gi.at(p);
        for a in 0..n {
            for b in 0..n {
                o[a * n + b] = w[p] * s.at(p)[0] * inv[sym_index(n, a, b)];
            }
        }
    });
    let du = divergence_of_leading(ctx, &u, n);
    // δd part: E^j = -∂_i(w F^{ij})
    let parts: Vec<Field> = (0..n).map(|a| ctx.diff.diff(&w1.values, a)).collect();
    let v = Field::from_points(ctx.npts(), n * n, |p, o| {
        let inv = gi.at(p);
        let f = |i: usize, j: usize| parts[i].at(p)[j] - parts[j].at(p)[i];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += inv[sym_index(n, i, a)] * inv[sym_index(n, j, b)] * f(a, b);
                    }
                }
                o[i * n + j] = w[p] * acc;
            }
        }
    });
    let dv = divergence_of_leading(ctx, &v, n);
    let e = Field::from_points(ctx.npts(), n, |p, o| {
        let inv = gi.at(p);
        let gam = conn.at(p);
        let ws = w[p] * s.at(p)[0];
        for b in 0..n {
            let mut c = 0.0;
            for a in 0..n {
                for k in 0..n {
                    c += inv[sym_index(n, a, k)] * gam[(b * n + a) * n + k];
                }
            }
            o[b] = du.at(p)[b] + ws * c - dv.at(p)[b];
        }
    });
    Ok(lower_density(ctx, &e))
}

/// Energy `‖∇h‖²` on symmetric 2-tensors.
fn rough(ctx: &ManifoldContext, h: &TensorField) -> TensorField {
    let n = ctx.dim();
    let w = weights(ctx);
    let gi = &ctx.metric.g_inv.values;
    let g = &ctx.metric.g.values;
    let conn = ctx.connection();
    let t = nabla(ctx, &Tensor::from_sym2(h));
    let idx = |a: usize, i: usize, j: usize| (a * n + i) * n + j;
    // R^{aij} = w g^{ab} g^{ic} g^{jd} (∇h)_{bcd}
    let raised = Field::from_points(ctx.npts(), n * n * n, |p, o| {
        let inv = gi.at(p);
        let tv = t.f.at(p);
        let gm = |a: usize, b: usize| inv[sym_index(n, a, b)];
        let mut s1 = vec![0.0; n * n * n];
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    s1[idx(a, i, j)] = (0..n).map(|d| gm(j, d) * tv[idx(a, i, d)]).sum();
                }
            }
        }
        let mut s2 = vec![0.0; n * n * n];
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    s2[idx(a, i, j)] = (0..n).map(|c| gm(i, c) * s1[idx(a, c, j)]).sum();
                }
            }
        }
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    o[idx(a, i, j)] = w[p] * (0..n).map(|b| gm(a, b) * s2[idx(b, i, j)]).sum::<f64>();
                }
            }
        }
    });
    let div = divergence_of_leading(ctx, &raised, n * n);
    let pairs = sym_pairs(n);
    let vals = Field::from_points(ctx.npts(), pairs.len(), |p, o| {
        let gam = conn.at(p);
        let r = raised.at(p);
        // E^{mj} = -∂_a R^{amj} - 2 Γ^m_{ai} R^{aij}
        let mut e = vec![0.0; n * n];
        for m in 0..n {
            for j in 0..n {
                let mut v = -div.at(p)[m * n + j];
                for a in 0..n {
                    for i in 0..n {
                        v -= 2.0 * gam[(m * n + a) * n + i] * r[idx(a, i, j)];
                    }
                }
                e[m * n + j] = v;
            }
        }
        let gm = g.at(p);
        let lo = |a: usize, b: usize| gm[sym_index(n, a, b)];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let mut v = 0.0;
            for a in 0..n {
                for b in 0..n {
                    v += lo(i, a) * lo(j, b) * 0.5 * (e[a * n + b] + e[b * n + a]);
                }
            }
            o[k] = v / w[p];
        }
    });
    ctx.field(Valence::Sym2, vals)
}

/// `R̊h` with the Riemann tensor averaged over the pair exchange
/// `R_{ikjl} ↔ R_{kilj}`, which makes it pointwise self-adjoint exactly.
fn second_kind_symmetric(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    let curv = ctx.curvature()?;
    let n = ctx.dim();
    let gi = &ctx.metric.g_inv.values;
    let pairs = sym_pairs(n);
    let r4 = |i: usize, k: usize, j: usize, l: usize| ((i * n + k) * n + j) * n + l;
    let vals = Field::from_points(ctx.npts(), pairs.len(), |p, o| {
        let inv = gi.at(p);
        let hv = h.at(p);
        let mut hu = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                let mut v = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        v += inv[sym_index(n, k, a)] * inv[sym_index(n, l, b)] * hv[sym_index(n, a, b)];
                    }
                }
                hu[k * n + l] = v;
            }
        }
        let r = curv.riemann_at(p);
        for (c, &(i, j)) in pairs.iter().enumerate() {
            let mut v = 0.0;
            for k in 0..n {
                for l in 0..n {
                    let a = 0.5 * (r[r4(i, k, j, l)] + r[r4(k, i, l, j)]);
                    let b = 0.5 * (r[r4(j, k, i, l)] + r[r4(k, j, l, i)]);
                    v += 0.5 * (a + b) * hu[k * n + l];
                }
            }
            o[c] = v;
        }
    });
    Ok(ctx.field(Valence::Sym2, vals))
}

/// Applies a self-adjoint operator through its energy form.
pub(crate) fn apply_weak(ctx: &ManifoldContext, op: OperatorId, f: &TensorField) -> Result<TensorField> {
    match op.name {
        OperatorName::ScalarLaplacian => Ok(scalar_laplacian(ctx, f)),
        OperatorName::Hodge1form => hodge(ctx, f),
        OperatorName::RoughLaplacian => Ok(rough(ctx, f)),
        OperatorName::RicciComposition => apply(ctx, op, f),
        OperatorName::Lichnerowicz => {
            let curv = ctx.curvature()?;
            let base = rough(ctx, f).axpy(-2.0, &second_kind_symmetric(ctx, f)?);
            match op.variant.unwrap_or(LichnerowiczVariant::General) {
                LichnerowiczVariant::General => Ok(base.add(&curv.ricci_compose(ctx, f)?)),
                LichnerowiczVariant::EinsteinReduced => {
                    let rel = curv.einstein_residual_sup / curv.lambda_hat.abs().max(1.0);
                    if !(rel <= einstein_threshold(ctx)) {
                        return Err(Error::Precondition(format!(
                            "einstein_reduced Lichnerowicz needs an Einstein background; relative residual {rel:.3e} exceeds {:.3e}",
                            einstein_threshold(ctx)
                        )));
                    }
                    Ok(base.axpy(2.0 * curv.lambda_hat, f))
                }
                LichnerowiczVariant::RicciIdentity if ctx.flat => apply(ctx, op, f),
                LichnerowiczVariant::RicciIdentity => Err(Error::Unsupported(
                    "the Ricci-identity variant has no energy form; assemble the general variant".into(),
                )),
            }
        }
        _ => Err(Error::Config(format!("{op} is not a self-adjoint operator"))),
    }
}
