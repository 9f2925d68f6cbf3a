//! Chen-Nagano and transverse-traceless gauge residuals, classification and
//! synthesis of gauge-satisfying tensors on flat tori.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sym_pairs, TensorField, Valence};
use crate::fourier;
use crate::geometry::ManifoldContext;
use crate::operators::{divergence, exterior_d, scalar_times_metric, trace, trace_split};

/// `δh + ½ d(tr h)`.
pub fn cn_residual(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    let dh = divergence(ctx, h)?;
    let du = exterior_d(ctx, &trace(ctx, h)?)?;
    Ok(dh.axpy(0.5, &du))
}

/// `δh₀ + ((n-2)/(2n)) d(tr h)` with `h₀` the trace-free part.
pub fn coupling_residual(ctx: &ManifoldContext, h: &TensorField) -> Result<TensorField> {
    let n = ctx.dim() as f64;
    let (h0, u) = trace_split(ctx, h)?;
    let dh0 = divergence(ctx, &h0)?;
    let du = exterior_d(ctx, &u)?;
    Ok(dh0.axpy((n - 2.0) / (2.0 * n), &du))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeClass {
    #[serde(rename = "TT")]
    Tt,
    #[serde(rename = "CN_strict")]
    CnStrict,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    /// Residual norms are relative to the sup-norm of `h`.
    pub cn_residual_norm: f64,
    /// Relative L² norm of the Chen-Nagano residual (tori only).
    pub cn_residual_l2: Option<f64>,
    pub tt_divergence_norm: f64,
    pub tt_trace_norm: f64,
    pub coupling_residual_norm: f64,
    /// `(1/Vol) ∫ tr h dV` (tori only).
    pub mean_trace: Option<f64>,
    /// `None` on open charts.
    pub classification: Option<GaugeClass>,
    pub tolerance_used: f64,
}

/// Default relative threshold for [`classify`].
pub fn default_tolerance(ctx: &ManifoldContext) -> f64 {
    if ctx.is_spectral() {
        1e-8
    } else {
        10.0 * ctx.diff_tolerance()
    }
}

/// `(1/Vol) ∫ tr h dV`.
pub fn mean_trace(ctx: &ManifoldContext, h: &TensorField) -> Result<f64> {
    Ok(ctx.integrate(&trace(ctx, h)?)? / ctx.volume()?)
}

pub fn classify(ctx: &ManifoldContext, h: &TensorField, tol: Option<f64>) -> Result<GaugeReport> {
    let tol = tol.unwrap_or_else(|| default_tolerance(ctx));
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let scale = ctx.sup_norm(h);
    let rel = |v: f64| if scale > 0.0 { v / scale } else { v };
    let cn = cn_residual(ctx, h)?;
    let coupling = coupling_residual(ctx, h)?;
    let div = divergence(ctx, h)?;
    let tr = trace(ctx, h)?;
    let cn_norm = rel(ctx.sup_norm(&cn));
    let div_norm = rel(ctx.sup_norm(&div));
    let tr_norm = rel(ctx.sup_norm(&tr));
    let torus = ctx.is_torus();
    let (cn_l2, mean, classification) = if torus {
        let hl2 = ctx.l2_norm(h)?;
        let l2 = ctx.l2_norm(&cn)?;
        let class = if tr_norm <= tol && div_norm <= tol {
            GaugeClass::Tt
        } else if cn_norm <= tol {
            GaugeClass::CnStrict
        } else {
            GaugeClass::Neither
        };
        (
            Some(if hl2 > 0.0 { l2 / hl2 } else { l2 }),
            Some(mean_trace(ctx, h)?),
            Some(class),
        )
    } else {
        (None, None, None)
    };
    Ok(GaugeReport {
        cn_residual_norm: cn_norm,
        cn_residual_l2: cn_l2,
        tt_divergence_norm: div_norm,
        tt_trace_norm: tr_norm,
        coupling_residual_norm: rel(ctx.sup_norm(&coupling)),
        mean_trace: mean,
        classification,
        tolerance_used: tol,
    })
}

/// Square root and inverse square root of the constant metric of a flat torus.
pub(crate) fn flat_frame(ctx: &ManifoldContext) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(ctx.is_torus() && ctx.flat) {
        return Err(Error::Unsupported(format!(
            "{} is not a flat torus; Fourier synthesis needs a constant metric",
            ctx.model_name
        )));
    }
    let n = ctx.dim();
    let g = ctx.metric.g.matrix_at(0);
    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| g[i][j]));
    let v = &eig.eigenvectors;
    let t = v * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * v.transpose();
    let s = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt())) * v.transpose();
    Ok((t, s))
}

/// Orthogonal projection onto `{A m = 0, tr A = 0}` for a unit vector `m`
/// (Frobenius metric); `m = None` keeps only the trace-free condition.
fn tt_project(a: &DMatrix<Complex64>, m: Option<&DVector<f64>>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let p = match m {
        Some(m) => DMatrix::<f64>::identity(n, n) - m * m.transpose(),
        None => DMatrix::<f64>::identity(n, n),
    };
    let pc = p.map(|v| Complex64::new(v, 0.0));
    let pap = &pc * a * &pc;
    let rank = p.trace().round();
    let tr = pap.trace();
    if rank > 0.0 {
        pap - pc * (tr / rank)
    } else {
        pap
    }
}

/// Draws a transverse-traceless field on a flat torus from all modes with
/// `|k|_∞ <= bandwidth`. On `T²` only the constant mode survives.
pub fn synthesize_tt_torus(ctx: &ManifoldContext, seed: u64, bandwidth: usize) -> Result<TensorField> {
    let (t, s) = flat_frame(ctx)?;
    let n = ctx.dim();
    let shape = ctx.grid.shape.clone();
    let half = (shape[0] - 1) / 2;
    if bandwidth > half {
        return Err(Error::Precondition(format!(
            "bandwidth {bandwidth} exceeds the grid's largest mode {half}"
        )));
    }
    let npts = ctx.npts();
    let pairs = sym_pairs(n);
    let mut spec = vec![vec![Complex64::new(0.0, 0.0); npts]; pairs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tc = t.map(|v| Complex64::new(v, 0.0));
    for q in 0..npts {
        let k = fourier::wavevector(q, &shape);
        if k.iter().any(|v| v.unsigned_abs() as usize > bandwidth) {
            continue;
        }
        let k2: f64 = k.iter().map(|v| (v * v) as f64).sum();
        let w = 1.0 / (1.0 + k2);
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w;
                a[(i, j)] = z;
                a[(j, i)] = z;
            }
        }
        let m = if k2 == 0.0 {
            None
        } else {
            let kv = DVector::from_iterator(n, k.iter().map(|&v| v as f64));
            let sk = &s * kv;
            let norm = sk.norm();
            Some(sk / norm)
        };
        let frame = tt_project(&a, m.as_ref());
        let coord = &tc * frame * &tc;
        for (c, &(i, j)) in pairs.iter().enumerate() {
            spec[c][q] = coord[(i, j)] * npts as f64;
        }
    }
    let values = fourier::inverse_components(spec, &shape);
    Ok(ctx.field(Valence::Sym2, values))
}

/// Orthonormal (Frobenius) basis of symmetric `n x n` matrices, in sym2 storage order.
fn sym_basis(n: usize) -> Vec<DMatrix<f64>> {
    sym_pairs(n)
        .iter()
        .map(|&(i, j)| {
            let mut e = DMatrix::zeros(n, n);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            e
        })
        .collect()
}

/// Minimal-norm trace-free `A` with `A m = rhs` (real data), by pseudoinverse.
fn min_norm_trace_free(m: &DVector<f64>, rhs: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = m.len();
    let basis = sym_basis(n);
    let nb = basis.len();
    let mut c = DMatrix::zeros(n + 1, nb);
    for (b, e) in basis.iter().enumerate() {
        let em = e * m;
        for j in 0..n {
            c[(j, b)] = em[j];
        }
        c[(n, b)] = e.trace();
    }
    let svd = c.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&v| v > 1e-12 * smax).count();
    if rank < n + 1 {
        return Err(Error::Internal(format!(
            "trace-free divergence system has rank {rank} < {}",
            n + 1
        )));
    }
    let pinv = svd
        .pseudo_inverse(1e-12 * smax)
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut b = DVector::zeros(n + 1);
    b.rows_mut(0, n).copy_from(rhs);
    let coef = pinv * b;
    let mut a = DMatrix::zeros(n, n);
    for (k, e) in basis.iter().enumerate() {
        a += e * coef[k];
    }
    Ok(a)
}

/// Builds a Chen-Nagano tensor `h = h₀ + (u/n) g` on a flat torus with
/// `tr h = u`. Per nonzero mode, `h₀` is the minimal-norm trace-free solution
/// of `δh₀ = -((n-2)/(2n)) du`; its zero mode vanishes. With `tt_seed` a
/// transverse-traceless part drawn by [`synthesize_tt_torus`] is added.
pub fn synthesize_cn_torus(
    ctx: &ManifoldContext,
    u: &TensorField,
    tt_seed: Option<(u64, usize)>,
) -> Result<TensorField> {
    ctx.check(u, Valence::Scalar)?;
    let (t, s) = flat_frame(ctx)?;
    let n = ctx.dim();
    let nf = n as f64;
    let coupling = (nf - 2.0) / (2.0 * nf);
    let shape = ctx.grid.shape.clone();
    let npts = ctx.npts();
    let pairs = sym_pairs(n);
    let uhat = fourier::forward_components(&u.values, &shape).remove(0);
    let mut spec = vec![vec![Complex64::new(0.0, 0.0); npts]; pairs.len()];
    for q in 0..npts {
        let k = fourier::wavevector(q, &shape);
        if k.iter().all(|&v| v == 0) || uhat[q].norm() == 0.0 {
            continue;
        }
        // In the orthonormal frame A = S Ĥ₀ S the conditions read
        // A (S k) = coupling û (S k) and tr A = 0.
        let kv = DVector::from_iterator(n, k.iter().map(|&v| v as f64));
        let m = &s * kv;
        let re = min_norm_trace_free(&m, &(&m * (coupling * uhat[q].re)))?;
        let im = min_norm_trace_free(&m, &(&m * (coupling * uhat[q].im)))?;
        let hre = &t * re * &t;
        let him = &t * im * &t;
        for (c, &(i, j)) in pairs.iter().enumerate() {
            spec[c][q] = Complex64::new(hre[(i, j)], him[(i, j)]);
        }
    }
    let h0 = ctx.field(Valence::Sym2, fourier::inverse_components(spec, &shape));
    let mut h = h0.add(&scalar_times_metric(ctx, &u.scaled(1.0 / nf))?);
    if let Some((seed, bw)) = tt_seed {
        h = h.add(&synthesize_tt_torus(ctx, seed, bw)?);
    }
    Ok(h)
}

#[cfg(test)]
mod tests;
