//! Torus operators as symmetric eigenproblems and the spectral statements
//! evaluated on them.
//!
//! Operators are represented in orthonormal DOF coordinates: at sample `p`
//! with quadrature weight `w_p` and fiber Gram matrix `M_p = L_p L_pᵀ`, a
//! field value `s_p` has coordinates `y_p = √w_p L_pᵀ s_p`, so the discrete L²
//! pairing becomes the Euclidean dot product.

mod blocks;
mod krylov;
mod ledger;
mod rigidity;
mod weak;
mod window;

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use krylov::{bicgstab, minres, SolveStats};
pub use ledger::{bochner_koiso_report, lower_bound_report, BochnerKoisoReport, LowerBoundReport, IntegralLedger};
pub use rigidity::{rigidity_solve, RigiditySolution};
pub use window::{spectral_window, SpectralWindowReport, WindowZone};

pub(crate) use blocks::BlockSymbol;

use crate::error::{Error, Result};
use crate::field::{sym_index, sym_pairs, Field, TensorField, Valence};
use crate::fourier;
use crate::geometry::ManifoldContext;
use crate::operators::{OperatorId, OperatorName};

/// DOF count above which the dense backend is not chosen automatically.
pub const DENSE_DOF_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralBackend {
    FourierBlock,
    Dense,
    Iterative,
}

impl fmt::Display for SpectralBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectralBackend::FourierBlock => "fourier_block",
            SpectralBackend::Dense => "dense",
            SpectralBackend::Iterative => "iterative",
        })
    }
}

impl std::str::FromStr for SpectralBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier_block" => Ok(SpectralBackend::FourierBlock),
            "dense" => Ok(SpectralBackend::Dense),
            "iterative" => Ok(SpectralBackend::Iterative),
            other => Err(Error::Config(format!("unknown eigensolver backend '{other}'"))),
        }
    }
}

fn is_self_adjoint(op: &OperatorId) -> bool {
    matches!(
        op.name,
        OperatorName::RoughLaplacian
            | OperatorName::ScalarLaplacian
            | OperatorName::Hodge1form
            | OperatorName::Lichnerowicz
            | OperatorName::RicciComposition
    )
}

/// Fiber Gram matrix of the metric inner product in storage coordinates.
fn fiber_gram(n: usize, valence: Valence, gi: &[f64]) -> DMatrix<f64> {
    match valence {
        Valence::Scalar => DMatrix::from_element(1, 1, 1.0),
        Valence::OneForm => DMatrix::from_fn(n, n, |i, j| gi[sym_index(n, i, j)]),
        Valence::Sym2 => {
            let pairs = sym_pairs(n);
            let entries = |&(i, j): &(usize, usize)| -> Vec<(usize, usize)> {
                if i == j {
                    vec![(i, i)]
                } else {
                    vec![(i, j), (j, i)]
                }
            };
            DMatrix::from_fn(pairs.len(), pairs.len(), |c, d| {
                let mut v = 0.0;
                for &(i, j) in &entries(&pairs[c]) {
                    for &(k, l) in &entries(&pairs[d]) {
                        v += gi[sym_index(n, i, k)] * gi[sym_index(n, j, l)];
                    }
                }
                v
            })
        }
    }
}

/// A symmetric operator on a torus in orthonormal DOF coordinates.
pub struct OperatorHandle<'a> {
    ctx: &'a ManifoldContext,
    terms: Vec<(f64, OperatorId)>,
    valence: Valence,
    ncomp: usize,
    /// `L_p` row-major per sample
    chol: Vec<f64>,
    sqrt_w: Vec<f64>,
}

/// Wraps a self-adjoint operator of a torus context.
pub fn assemble(ctx: &ManifoldContext, op: OperatorId) -> Result<OperatorHandle<'_>> {
    assemble_combination(ctx, &[(1.0, op)])
}

/// Wraps a linear combination `Σ c_i Op_i` of self-adjoint operators of equal valence.
pub fn assemble_combination<'a>(ctx: &'a ManifoldContext, terms: &[(f64, OperatorId)]) -> Result<OperatorHandle<'a>> {
    if !ctx.is_torus() {
        return Err(Error::Unsupported(format!(
            "spectra need a torus backend; {} is an open chart",
            ctx.model_name
        )));
    }
    let first = terms
        .first()
        .ok_or_else(|| Error::Config("empty operator combination".into()))?;
    let valence = first.1.signature().0;
    for (_, op) in terms {
        op.validate()?;
        if !is_self_adjoint(op) {
            return Err(Error::Config(format!("{op} is not a self-adjoint operator")));
        }
        if op.signature().0 != valence {
            return Err(Error::Config("operators of a combination must share their valence".into()));
        }
    }
    let n = ctx.dim();
    let ncomp = valence.ncomp(n);
    let weights = ctx.quadrature_weights.as_ref().expect("torus has weights");
    let mut chol = vec![0.0; ctx.npts() * ncomp * ncomp];
    for p in 0..ctx.npts() {
        let m = fiber_gram(n, valence, ctx.metric.g_inv.at(p));
        let l = m
            .cholesky()
            .ok_or_else(|| Error::Internal(format!("fiber metric not positive-definite at sample {p}")))?
            .l();
        for r in 0..ncomp {
            for c in 0..ncomp {
                chol[(p * ncomp + r) * ncomp + c] = l[(r, c)];
            }
        }
    }
    Ok(OperatorHandle {
        ctx,
        terms: terms.to_vec(),
        valence,
        ncomp,
        chol,
        sqrt_w: weights.iter().map(|w| w.sqrt()).collect(),
    })
}

impl<'a> OperatorHandle<'a> {
    pub fn context(&self) -> &'a ManifoldContext {
        self.ctx
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn ndof(&self) -> usize {
        self.ctx.npts() * self.ncomp
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, op)| if *c == 1.0 { op.to_string() } else { format!("{c}*{op}") })
            .collect();
        parts.join(" + ")
    }

    fn l_at(&self, p: usize) -> &[f64] {
        let k = self.ncomp * self.ncomp;
        &self.chol[p * k..(p + 1) * k]
    }

    /// `s_p = L_p^{-T} y_p / √w_p`.
    pub fn to_field(&self, y: &[f64]) -> TensorField {
        let m = self.ncomp;
        let values = Field::from_points(self.ctx.npts(), m, |p, o| {
            let l = self.l_at(p);
            let yp = &y[p * m..(p + 1) * m];
            // back substitution with Lᵀ (upper triangular)
            for r in (0..m).rev() {
                let mut v = yp[r];
                for c in r + 1..m {
                    v -= l[c * m + r] * o[c];
                }
                o[r] = v / l[r * m + r];
            }
            for v in o.iter_mut() {
                *v /= self.sqrt_w[p];
            }
        });
        self.ctx.field(self.valence, values)
    }

    /// `y_p = √w_p L_pᵀ s_p`.
    pub fn from_field(&self, h: &TensorField) -> Vec<f64> {
        let m = self.ncomp;
        let f = Field::from_points(self.ctx.npts(), m, |p, o| {
            let l = self.l_at(p);
            let s = h.at(p);
            for r in 0..m {
                let mut v = 0.0;
                for c in r..m {
                    v += l[c * m + r] * s[c];
                }
                o[r] = v * self.sqrt_w[p];
            }
        });
        f.data
    }

    pub fn apply_field(&self, h: &TensorField) -> Result<TensorField> {
        let mut out: Option<TensorField> = None;
        for (c, op) in &self.terms {
            let v = weak::apply_weak(self.ctx, *op, h)?;
            out = Some(match out {
                None => v.scaled(*c),
                Some(acc) => acc.axpy(*c, &v),
            });
        }
        Ok(out.expect("non-empty combination"))
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.from_field(&self.apply_field(&self.to_field(y))?))
    }

    /// Dense matrix in DOF coordinates (one application per DOF).
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let nd = self.ndof();
        let mut a = DMatrix::zeros(nd, nd);
        let mut e = vec![0.0; nd];
        for j in 0..nd {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            e[j] = 0.0;
            a.column_mut(j).copy_from_slice(&col);
        }
        Ok(a)
    }

    /// `max |A - Aᵀ| / max |A|`.
    pub fn asymmetry(&self) -> Result<f64> {
        let a = self.dense()?;
        let scale = a.abs().max();
        let d = (&a - a.transpose()).abs().max();
        Ok(if scale > 0.0 { d / scale } else { d })
    }

    /// Largest eigenvalue magnitude; exact on flat tori, power iteration otherwise.
    pub fn spectral_radius(&self) -> Result<f64> {
        if self.ctx.flat {
            let sym = BlockSymbol::new(self)?;
            return Ok(sym.max_abs_eigenvalue());
        }
        let nd = self.ndof();
        let mut v: Vec<f64> = (0..nd).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut est = 0.0;
        for _ in 0..200 {
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            let w = self.apply(&v)?;
            let new = norm(&w);
            let done = (new - est).abs() <= 1e-6 * new;
            est = new;
            v = w;
            if done {
                break;
            }
        }
        Ok(est)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    crate::reduce::pairwise_sum(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::reduce::pairwise_sum(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>())
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub eigenvalue: f64,
    /// L²-normalized eigentensor.
    pub eigenvector: TensorField,
    /// Canonical wavevector of the Fourier block, or of the dominant mode.
    pub label: Vec<i64>,
    /// `‖Op h - μ h‖_{L²}`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub operator: String,
    pub backend: SpectralBackend,
    pub eigenpairs: Vec<Eigenpair>,
    pub count: usize,
}

/// One row of the exported spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub label: Vec<i64>,
    pub residual: f64,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenpairs.iter().map(|e| e.eigenvalue).collect()
    }

    pub fn rows(&self) -> Vec<SpectrumRow> {
        self.eigenpairs
            .iter()
            .enumerate()
            .map(|(i, e)| SpectrumRow {
                index: i,
                eigenvalue: e.eigenvalue,
                label: e.label.clone(),
                residual: e.residual,
            })
            .collect()
    }

    /// CSV with columns `index,eigenvalue,label,residual`; labels are `k1;k2;..`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,label,residual\n");
        for r in self.rows() {
            let label: Vec<String> = r.label.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{},{:.17e},{},{:.3e}\n", r.index, r.eigenvalue, label.join(";"), r.residual));
        }
        s
    }
}

/// Eigenvalues closer than this are treated as one degenerate cluster.
fn tie_tolerance(mu: f64) -> f64 {
    1e-9 * mu.abs().max(1.0)
}

pub(crate) struct Candidate {
    mu: f64,
    label: Vec<i64>,
    sub: usize,
    y: Vec<f64>,
}

/// Groups ascending candidates into degenerate clusters sorted by label.
fn clusters(mut cands: Vec<Candidate>) -> Vec<Vec<Candidate>> {
    cands.sort_by(|a, b| a.mu.partial_cmp(&b.mu).unwrap_or(Ordering::Equal));
    let mut out: Vec<Vec<Candidate>> = Vec::new();
    for c in cands {
        match out.last_mut() {
            Some(g) if (c.mu - g[0].mu).abs() <= tie_tolerance(g[0].mu) => g.push(c),
            _ => out.push(vec![c]),
        }
    }
    for g in out.iter_mut() {
        g.sort_by(|a, b| a.label.cmp(&b.label).then(a.sub.cmp(&b.sub)));
    }
    out
}

/// `k` clusters-first nearest to `target`, returned ascending.
fn select(cands: Vec<Candidate>, k: usize, target: f64) -> Vec<Candidate> {
    let mut groups = clusters(cands);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (groups[a][0].mu - target).abs();
        let db = (groups[b][0].mu - target).abs();
        da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let mut keep = vec![0usize; groups.len()];
    let mut left = k;
    for g in order {
        if left == 0 {
            break;
        }
        let take = groups[g].len().min(left);
        keep[g] = take;
        left -= take;
    }
    let mut out = Vec::new();
    for (g, group) in groups.iter_mut().enumerate() {
        out.extend(group.drain(..keep[g]));
    }
    out
}

/// Canonical wavevector carrying the most energy of a DOF vector.
fn dominant_label(handle: &OperatorHandle, y: &[f64]) -> Vec<i64> {
    let shape = &handle.ctx.grid.shape;
    let f = Field {
        ncomp: handle.ncomp,
        data: y.to_vec(),
    };
    let spec = fourier::forward_components(&f, shape);
    let mut energy = std::collections::BTreeMap::<Vec<i64>, f64>::new();
    for q in 0..handle.ctx.npts() {
        let e: f64 = spec.iter().map(|c| c[q].norm_sqr()).sum();
        *energy.entry(fourier::canonical(&fourier::wavevector(q, shape))).or_default() += e;
    }
    let max = energy.values().cloned().fold(0.0, f64::max);
    energy
        .into_iter()
        .find(|(_, e)| *e >= max * (1.0 - 1e-9))
        .map(|(k, _)| k)
        .unwrap_or_default()
}

fn auto_backend(handle: &OperatorHandle) -> SpectralBackend {
    if handle.ctx.flat {
        SpectralBackend::FourierBlock
    } else if handle.ndof() <= DENSE_DOF_LIMIT {
        SpectralBackend::Dense
    } else {
        SpectralBackend::Iterative
    }
}

/// `k` eigenpairs nearest `target` with the automatically chosen backend.
pub fn eigensolve(handle: &OperatorHandle, k: usize, target: f64) -> Result<SpectralDecomposition> {
    eigensolve_with(handle, k, target, auto_backend(handle))
}

pub fn eigensolve_with(
    handle: &OperatorHandle,
    k: usize,
    target: f64,
    backend: SpectralBackend,
) -> Result<SpectralDecomposition> {
    if k == 0 {
        return Err(Error::Precondition("eigenpair count must be at least 1".into()));
    }
    let k = k.min(handle.ndof());
    let cands = match backend {
        SpectralBackend::FourierBlock => {
            if !handle.ctx.flat {
                return Err(Error::Unsupported(
                    "the fourier_block backend needs a constant metric (flat torus)".into(),
                ));
            }
            BlockSymbol::new(handle)?.candidates()
        }
        SpectralBackend::Dense => {
            let a = handle.dense()?;
            let sym = (&a + a.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            (0..handle.ndof())
                .map(|j| {
                    let y: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
                    Candidate {
                        mu: eig.eigenvalues[j],
                        label: dominant_label(handle, &y),
                        sub: 0,
                        y,
                    }
                })
                .collect()
        }
        SpectralBackend::Iterative => krylov::shift_invert(handle, k, target)?
            .into_iter()
            .map(|(mu, y)| Candidate {
                mu,
                label: dominant_label(handle, &y),
                sub: 0,
                y,
            })
            .collect(),
    };
    let chosen = select(cands, k, target);
    let mut eigenpairs = Vec::with_capacity(chosen.len());
    for c in chosen {
        let ay = handle.apply(&c.y)?;
        let r: Vec<f64> = ay.iter().zip(&c.y).map(|(a, y)| a - c.mu * y).collect();
        eigenpairs.push(Eigenpair {
            eigenvalue: c.mu,
            eigenvector: handle.to_field(&c.y),
            label: c.label,
            residual: norm(&r),
        });
    }
    Ok(SpectralDecomposition {
        operator: handle.describe(),
        backend,
        count: eigenpairs.len(),
        eigenpairs,
    })
}

/// All eigenvalues, ascending.
pub fn full_spectrum(handle: &OperatorHandle, backend: SpectralBackend) -> Result<Vec<f64>> {
    let mut ev = match backend {
        SpectralBackend::FourierBlock => BlockSymbol::new(handle)?.eigenvalues(),
        SpectralBackend::Dense => {
            let a = handle.dense()?;
            SymmetricEigen::new((&a + a.transpose()) * 0.5).eigenvalues.iter().copied().collect()
        }
        SpectralBackend::Iterative => {
            return Err(Error::Unsupported("the iterative backend computes partial spectra only".into()))
        }
    };
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(ev)
}

/// `⟨Op h, h⟩ / ⟨h, h⟩` in the discrete L² pairing.
pub fn rayleigh(ctx: &ManifoldContext, op: OperatorId, h: &TensorField) -> Result<f64> {
    let hh = ctx.l2_inner(h, h)?;
    if !(hh > 0.0) {
        return Err(Error::Precondition("Rayleigh quotient of a zero field".into()));
    }
    Ok(ctx.l2_inner(&crate::operators::apply(ctx, op, h)?, h)? / hh)
}

#[cfg(test)]
mod tests;
