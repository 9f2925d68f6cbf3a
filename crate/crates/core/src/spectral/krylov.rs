//! Krylov solvers and the shift-invert subspace iteration.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, norm, OperatorHandle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final residual relative to `‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// MINRES for symmetric, possibly indefinite `A x = b` (Paige-Saunders recurrences).
pub fn minres<F>(mut apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut rel = 1.0;
    for itn in 1..=max_iter {
        let v: Vec<f64> = y.iter().map(|t| t / beta).collect();
        y = apply(&v)?;
        if itn >= 2 {
            let f = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(a, b)| *a -= f * b);
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(a, b)| *a -= f * b);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = norm(&y);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        rel = phibar / beta1;
        if rel <= tol || beta == 0.0 {
            return Ok((
                x,
                SolveStats {
                    iterations: itn,
                    relative_residual: rel,
                    converged: true,
                },
            ));
        }
    }
    Ok((
        x,
        SolveStats {
            iterations: max_iter,
            relative_residual: rel,
            converged: false,
        },
    ))
}

/// BiCGSTAB for general `A x = b`.
pub fn bicgstab<F>(mut apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut rel = 1.0;
    for itn in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = apply(&p)?;
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(a, b)| a - alpha * b).collect();
        if norm(&s) / bnorm <= tol {
            x.iter_mut().zip(&p).for_each(|(a, b)| *a += alpha * b);
            return Ok((
                x,
                SolveStats {
                    iterations: itn,
                    relative_residual: norm(&s) / bnorm,
                    converged: true,
                },
            ));
        }
        let t = apply(&s)?;
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: itn,
                    relative_residual: rel,
                    converged: true,
                },
            ));
        }
    }
    Ok((
        x,
        SolveStats {
            iterations: max_iter,
            relative_residual: rel,
            converged: false,
        },
    ))
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

const MAX_OUTER: usize = 150;

/// Ritz pairs nearest `target` by subspace iteration on `(A - σ)^{-1}` with
/// inexact MINRES solves and Rayleigh-Ritz on `A` itself.
pub(crate) fn shift_invert(handle: &OperatorHandle, k: usize, target: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let nd = handle.ndof();
    let block = (k + 6).min(nd);
    // stay off an exact eigenvalue so the kernel of A - σ is amplified, not lost
    let sigma = target - 1e-4 * (1.0 + target.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = orthonormalize(DMatrix::from_fn(nd, block, |_, _| rng.gen_range(-1.0..1.0)));
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_OUTER {
        let mut y = DMatrix::zeros(nd, block);
        for j in 0..block {
            let b: Vec<f64> = x.column(j).iter().copied().collect();
            let (sol, _) = minres(
                |v| {
                    let mut av = handle.apply(v)?;
                    av.iter_mut().zip(v).for_each(|(a, b)| *a -= sigma * b);
                    Ok(av)
                },
                &b,
                1e-10,
                4 * nd.max(50),
            )?;
            y.column_mut(j).copy_from_slice(&sol);
        }
        let q = orthonormalize(y);
        let mut aq = DMatrix::zeros(nd, block);
        for j in 0..block {
            let col: Vec<f64> = q.column(j).iter().copied().collect();
            aq.column_mut(j).copy_from_slice(&handle.apply(&col)?);
        }
        let h = q.transpose() * &aq;
        let eig = SymmetricEigen::new((&h + h.transpose()) * 0.5);
        x = &q * &eig.eigenvectors;
        let ax = &aq * &eig.eigenvectors;
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| {
            (eig.eigenvalues[a] - target)
                .abs()
                .partial_cmp(&(eig.eigenvalues[b] - target).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        worst = 0.0;
        for &j in order.iter().take(k) {
            let mu = eig.eigenvalues[j];
            let r = (ax.column(j) - x.column(j) * mu).norm();
            worst = f64::max(worst, r / (1e-8 * mu.abs() + 1e-10));
        }
        if worst <= 0.5 {
            return Ok(order
                .into_iter()
                .take(k)
                .map(|j| (eig.eigenvalues[j], x.column(j).iter().copied().collect()))
                .collect());
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_OUTER,
        worst_residual: worst,
    })
}
