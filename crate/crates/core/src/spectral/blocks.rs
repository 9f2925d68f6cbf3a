//! Per-wavevector symbols of translation-invariant operators on flat tori.
//!
//! On a constant metric an operator commutes with translations, so it acts on
//! each Fourier mode by an `ncomp x ncomp` Hermitian matrix `S(k)`. `S(k)` is
//! read off the operator's response to a unit impulse at the origin.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{Candidate, OperatorHandle};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::fourier;

pub(crate) struct BlockSymbol {
    shape: Vec<usize>,
    ncomp: usize,
    npts: usize,
    /// `S(k)` for every linear mode index.
    blocks: Vec<DMatrix<Complex64>>,
}

impl BlockSymbol {
    pub(crate) fn new(handle: &OperatorHandle) -> Result<Self> {
        let ctx = handle.context();
        if !(ctx.is_torus() && ctx.flat) {
            return Err(Error::Unsupported("Fourier blocks need a flat torus".into()));
        }
        let m = handle.ncomp();
        let npts = ctx.npts();
        let shape = ctx.grid.shape.clone();
        let mut response: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(m);
        let mut e = vec![0.0; handle.ndof()];
        for c in 0..m {
            e[c] = 1.0;
            let col = handle.apply(&e)?;
            e[c] = 0.0;
            response.push(fourier::forward_components(&Field { ncomp: m, data: col }, &shape));
        }
        let blocks = (0..npts)
            .map(|q| {
                let s = DMatrix::from_fn(m, m, |r, c| response[c][r][q]);
                (&s + s.adjoint()) * Complex64::new(0.5, 0.0)
            })
            .collect();
        Ok(BlockSymbol {
            shape,
            ncomp: m,
            npts,
            blocks,
        })
    }

    pub(crate) fn eigenvalues(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| SymmetricEigen::new(b.clone()).eigenvalues.iter().copied().collect::<Vec<_>>())
            .collect()
    }

    pub(crate) fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    /// Real eigenvectors: `√2 Re` and `√2 Im` of each complex mode in the
    /// canonical half-space, plus the real eigenvectors of the zero mode.
    pub(crate) fn candidates(&self) -> Vec<Candidate> {
        let m = self.ncomp;
        let inv_sqrt_n = 1.0 / (self.npts as f64).sqrt();
        let positions: Vec<Vec<usize>> = (0..self.npts)
            .map(|p| {
                let mut idx = vec![0; self.shape.len()];
                let mut rem = p;
                for a in (0..self.shape.len()).rev() {
                    idx[a] = rem % self.shape[a];
                    rem /= self.shape[a];
                }
                idx
            })
            .collect();
        let mut out = Vec::new();
        for q in 0..self.npts {
            let k = fourier::wavevector(q, &self.shape);
            if !fourier::is_canonical(&k) {
                continue;
            }
            if k.iter().all(|&v| v == 0) {
                let re = self.blocks[q].map(|z| z.re);
                let eig = SymmetricEigen::new(re);
                for j in 0..m {
                    let v = eig.eigenvectors.column(j);
                    let y: Vec<f64> = (0..self.npts * m).map(|i| v[i % m] * inv_sqrt_n).collect();
                    out.push(Candidate {
                        mu: eig.eigenvalues[j],
                        label: k.clone(),
                        sub: j,
                        y,
                    });
                }
                continue;
            }
            let eig = SymmetricEigen::new(self.blocks[q].clone());
            let phases: Vec<Complex64> = positions
                .iter()
                .map(|idx| {
                    let t: f64 = idx
                        .iter()
                        .zip(&k)
                        .zip(&self.shape)
                        .map(|((&j, &kk), &nn)| kk as f64 * j as f64 / nn as f64)
                        .sum();
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
                })
                .collect();
            for j in 0..m {
                let v = eig.eigenvectors.column(j);
                let scale = std::f64::consts::SQRT_2 * inv_sqrt_n;
                let mut yr = vec![0.0; self.npts * m];
                let mut yi = vec![0.0; self.npts * m];
                for p in 0..self.npts {
                    for c in 0..m {
                        let z = v[c] * phases[p] * scale;
                        yr[p * m + c] = z.re;
                        yi[p * m + c] = z.im;
                    }
                }
                out.push(Candidate {
                    mu: eig.eigenvalues[j],
                    label: k.clone(),
                    sub: 2 * j,
                    y: yr,
                });
                out.push(Candidate {
                    mu: eig.eigenvalues[j],
                    label: k.clone(),
                    sub: 2 * j + 1,
                    y: yi,
                });
            }
        }
        out
    }

    /// `f(A) y`, applying `f` to each block's eigenvalues.
    pub(crate) fn apply_function<F: Fn(f64) -> f64>(&self, y: &[f64], f: F) -> Vec<f64> {
        let m = self.ncomp;
        let mut spec = fourier::forward_components(
            &Field {
                ncomp: m,
                data: y.to_vec(),
            },
            &self.shape,
        );
        for q in 0..self.npts {
            let eig = SymmetricEigen::new(self.blocks[q].clone());
            let fl = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&l| Complex64::new(f(l), 0.0)));
            let u = &eig.eigenvectors;
            let yq = DVector::from_iterator(m, (0..m).map(|c| spec[c][q]));
            let coef = u.adjoint() * yq;
            let out = u * coef.component_mul(&fl);
            for c in 0..m {
                spec[c][q] = out[c];
            }
        }
        fourier::inverse_components(spec, &self.shape).data
    }
}
