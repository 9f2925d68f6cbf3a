//! Levi-Civita connection and curvature.
//!
//! Index conventions: `gamma[(k * n + i) * n + j] = Γ^k_{ij}`. The stored
//! Riemann array is `riemann[((i * n + k) * n + j) * n + l] = R_{ikjl}` with
//! `R_{ikjl} = sign * g(R(∂_i, ∂_k) ∂_j, ∂_l)` and
//! `R(X, Y) = ∇_X ∇_Y - ∇_Y ∇_X - ∇_[X,Y]`. The sign is fixed by the
//! convention pin, under which `(R̊h)_{ij} = R_{ikjl} h^{kl}`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::ManifoldContext;
use crate::error::{Error, Result};
use crate::field::{sym_index, Field, TensorField, Tensor, Valence};
use crate::reduce;

#[derive(Debug, Clone)]
pub struct Connection {
    pub gamma: Field,
}

impl Connection {
    pub(crate) fn compute(ctx: &ManifoldContext) -> Self {
        let n = ctx.dim();
        let g = &ctx.metric.g.values;
        let dg: Vec<Field> = (0..n).map(|a| ctx.diff.diff(g, a)).collect();
        let gi = &ctx.metric.g_inv.values;
        let gamma = Field::from_points(ctx.npts(), n * n * n, |p, o| {
            let inv = gi.at(p);
            let d = |a: usize, i: usize, j: usize| dg[a].at(p)[sym_index(n, i, j)];
            for i in 0..n {
                for j in i..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += inv[sym_index(n, k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                        }
                        o[(k * n + i) * n + j] = 0.5 * s;
                        o[(k * n + j) * n + i] = 0.5 * s;
                    }
                }
            }
        });
        Connection { gamma }
    }

    #[inline]
    pub fn at(&self, p: usize) -> &[f64] {
        self.gamma.at(p)
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub christoffel: Field,
    pub riemann: Field,
    pub riemann_sign: f64,
    pub ricci: TensorField,
    pub scalar: TensorField,
    /// Mean of `s / n` over measurement samples.
    pub lambda_hat: f64,
    /// Largest deviation of `s / n` from `lambda_hat`.
    pub lambda_max_deviation: f64,
    pub einstein_residual_sup: f64,
}

impl CurvatureBundle {
    pub(crate) fn compute(ctx: &ManifoldContext, riemann_sign: f64) -> Self {
        let n = ctx.dim();
        let conn = ctx.connection();
        let dgam: Vec<Field> = (0..n).map(|a| ctx.diff.diff(&conn.gamma, a)).collect();
        let g = &ctx.metric.g.values;
        let gi = &ctx.metric.g_inv.values;
        let n2 = n * n;
        let n3 = n2 * n;
        // rm[((i n + j) n + k) n + l] = g(R(∂_i,∂_j)∂_k, ∂_l) first; then signed.
        let riemann = Field::from_points(ctx.npts(), n2 * n2, |p, o| {
            let gam = conn.gamma.at(p);
            let gm = g.at(p);
            let mut up = vec![0.0; n3 * n];
            for i in 0..n {
                let di = dgam[i].at(p);
                for j in 0..n {
                    let dj = dgam[j].at(p);
                    for k in 0..n {
                        for m in 0..n {
                            let mut v = di[(m * n + j) * n + k] - dj[(m * n + i) * n + k];
                            for q in 0..n {
                                v += gam[(m * n + i) * n + q] * gam[(q * n + j) * n + k]
                                    - gam[(m * n + j) * n + q] * gam[(q * n + i) * n + k];
                            }
                            up[((i * n + j) * n + k) * n + m] = v;
                        }
                    }
                }
            }
            for ijk in 0..n3 {
                for l in 0..n {
                    let mut v = 0.0;
                    for m in 0..n {
                        v += gm[sym_index(n, l, m)] * up[ijk * n + m];
                    }
                    o[ijk * n + l] = riemann_sign * v;
                }
            }
        });
        // Ric_{jk} = R^i_{ijk} = g^{il} g(R(∂_i,∂_j)∂_k, ∂_l); independent of the sign.
        let ric_full = Field::from_points(ctx.npts(), n2, |p, o| {
            let r = riemann.at(p);
            let inv = gi.at(p);
            for j in 0..n {
                for k in 0..n {
                    let mut v = 0.0;
                    for i in 0..n {
                        for l in 0..n {
                            v += inv[sym_index(n, i, l)] * r[((i * n + j) * n + k) * n + l];
                        }
                    }
                    o[j * n + k] = v * riemann_sign;
                }
            }
        });
        let ricci = Tensor { rank: 2, n, f: ric_full }.to_sym2(ctx.id());
        let scalar_vals = Field::from_points(ctx.npts(), 1, |p, o| {
            let r = ricci.at(p);
            let inv = gi.at(p);
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += inv[sym_index(n, i, j)] * r[sym_index(n, i, j)];
                }
            }
            o[0] = s;
        });
        let scalar = TensorField::new(Valence::Scalar, n, ctx.id(), scalar_vals);
        let s_over_n: Vec<f64> = ctx.interior().iter().map(|&p| scalar.at(p)[0] / n as f64).collect();
        let lambda_hat = reduce::mean(&s_over_n);
        let lambda_max_deviation = reduce::sup_abs(s_over_n.iter().map(|v| v - lambda_hat));
        let einstein_residual_sup = reduce::sup_abs(ctx.interior().iter().flat_map(|&p| {
            let r = ricci.at(p);
            let gm = g.at(p);
            (0..r.len()).map(move |c| r[c] - lambda_hat * gm[c]).collect::<Vec<_>>()
        }));
        CurvatureBundle {
            christoffel: conn.gamma.clone(),
            riemann,
            riemann_sign,
            ricci,
            scalar,
            lambda_hat,
            lambda_max_deviation,
            einstein_residual_sup,
        }
    }

    #[inline]
    pub fn riemann_at(&self, p: usize) -> &[f64] {
        self.riemann.at(p)
    }

    /// `(R̊h)_{ij} = R_{ikjl} h^{kl}`.
    pub fn second_kind_apply(&self, ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
        ctx.check(h, Valence::Sym2)?;
        let n = ctx.dim();
        let gi = &ctx.metric.g_inv.values;
        let full = Field::from_points(ctx.npts(), n * n, |p, o| {
            let hu = raise_sym2(n, gi.at(p), h.at(p));
            let r = self.riemann.at(p);
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for k in 0..n {
                        for l in 0..n {
                            v += r[((i * n + k) * n + j) * n + l] * hu[k * n + l];
                        }
                    }
                    o[i * n + j] = v;
                }
            }
        });
        Ok(Tensor { rank: 2, n, f: full }.to_sym2(ctx.id()))
    }

    /// `Ric∘h + h∘Ric` with `(Ric∘h)_{ij} = Ric_i^k h_{kj}`.
    pub fn ricci_compose(&self, ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
        ctx.check(h, Valence::Sym2)?;
        let n = ctx.dim();
        let gi = &ctx.metric.g_inv.values;
        let vals = Field::from_points(ctx.npts(), n * (n + 1) / 2, |p, o| {
            let inv = gi.at(p);
            let r = self.ricci.at(p);
            let hv = h.at(p);
            // mixed[i][k] = Ric_i^k = Ric_{ia} g^{ak}
            let mut mixed = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let mut v = 0.0;
                    for a in 0..n {
                        v += r[sym_index(n, i, a)] * inv[sym_index(n, a, k)];
                    }
                    mixed[i * n + k] = v;
                }
            }
            for i in 0..n {
                for j in i..n {
                    let mut v = 0.0;
                    for k in 0..n {
                        v += mixed[i * n + k] * hv[sym_index(n, k, j)] + hv[sym_index(n, i, k)] * mixed[j * n + k];
                    }
                    o[sym_index(n, i, j)] = v;
                }
            }
        });
        Ok(ctx.field(Valence::Sym2, vals))
    }

    /// Eigenvalues of R̊ restricted to trace-free symmetric tensors at a
    /// measurement sample, ascending.
    pub fn second_kind_spectrum(&self, ctx: &ManifoldContext, p: usize) -> Result<Vec<f64>> {
        if !ctx.grid.is_interior(p) {
            return Err(Error::Domain(format!("sample {p} is outside the chart interior")));
        }
        let n = ctx.dim();
        let r = self.riemann.at(p);
        if r.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain(format!("curvature undefined at sample {p}")));
        }
        // orthonormal frame e = g^{-1/2}
        let gm = DMatrix::from_fn(n, n, |i, j| ctx.metric.g.at(p)[sym_index(n, i, j)]);
        let eig = SymmetricEigen::new(gm);
        let s = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
            * eig.eigenvectors.transpose();
        let t = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.sqrt()))
            * eig.eigenvectors.transpose();
        let basis = trace_free_basis(n);
        let m = basis.len();
        // a tensor with frame components E has coordinate components g^{1/2} E g^{1/2}
        let coord: Vec<DMatrix<f64>> = basis.iter().map(|e| &t * e * &t).collect();
        let gi = &ctx.metric.g_inv.values;
        let mut mat = DMatrix::zeros(m, m);
        for b in 0..m {
            let hb: Vec<f64> = (0..n * n).map(|q| coord[b][(q / n, q % n)]).collect();
            let hsym: Vec<f64> = (0..n * (n + 1) / 2)
                .map(|c| {
                    let (i, j) = crate::field::sym_pairs(n)[c];
                    hb[i * n + j]
                })
                .collect();
            let hu = raise_sym2(n, gi.at(p), &hsym);
            let mut rh = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for k in 0..n {
                        for l in 0..n {
                            v += r[((i * n + k) * n + j) * n + l] * hu[k * n + l];
                        }
                    }
                    rh[(i, j)] = v;
                }
            }
            // frame components of R̊h are S rh S
            let frame = &s * rh * &s;
            for a in 0..m {
                mat[(a, b)] = basis[a].component_mul(&frame).sum();
            }
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(ev)
    }
}

/// `h^{kl} = g^{ka} g^{lb} h_{ab}` as a full row-major matrix.
pub(crate) fn raise_sym2(n: usize, inv: &[f64], h: &[f64]) -> Vec<f64> {
    let mut tmp = vec![0.0; n * n];
    for k in 0..n {
        for b in 0..n {
            let mut v = 0.0;
            for a in 0..n {
                v += inv[sym_index(n, k, a)] * h[sym_index(n, a, b)];
            }
            tmp[k * n + b] = v;
        }
    }
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            let mut v = 0.0;
            for b in 0..n {
                v += tmp[k * n + b] * inv[sym_index(n, b, l)];
            }
            out[k * n + l] = v;
        }
    }
    out
}

/// Orthonormal basis (Frobenius) of trace-free symmetric `n x n` matrices.
pub(crate) fn trace_free_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut basis = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
            e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            basis.push(e);
        }
    }
    // Helmert vectors for the diagonal
    for k in 1..n {
        let c = 1.0 / ((k * (k + 1)) as f64).sqrt();
        let mut e = DMatrix::zeros(n, n);
        for i in 0..k {
            e[(i, i)] = c;
        }
        e[(k, k)] = -(k as f64) * c;
        basis.push(e);
    }
    basis
}
