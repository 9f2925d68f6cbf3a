//! Sampled tensor fields.
//!
//! Storage is point-major: the components of sample `p` live in
//! `data[p * ncomp .. (p + 1) * ncomp]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Raw point-major component array.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(npts: usize, ncomp: usize) -> Self {
        Field {
            ncomp,
            data: vec![0.0; npts * ncomp],
        }
    }

    pub fn npts(&self) -> usize {
        if self.ncomp == 0 {
            0
        } else {
            self.data.len() / self.ncomp
        }
    }

    #[inline]
    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p * self.ncomp..(p + 1) * self.ncomp]
    }

    #[inline]
    pub fn at_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.ncomp..(p + 1) * self.ncomp]
    }

    /// Builds a field by evaluating `f(p, out)` at every sample.
    pub fn from_points<F>(npts: usize, ncomp: usize, f: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let mut data = vec![0.0; npts * ncomp];
        if ncomp > 0 {
            data.par_chunks_mut(ncomp)
                .enumerate()
                .for_each(|(p, out)| f(p, out));
        }
        Field { ncomp, data }
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.npts()).map(|p| self.data[p * self.ncomp + c]).collect()
    }

    pub fn set_component(&mut self, c: usize, values: &[f64]) {
        let nc = self.ncomp;
        for (p, v) in values.iter().enumerate() {
            self.data[p * nc + c] = *v;
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            ncomp: self.ncomp,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        assert_eq!(self.data.len(), other.data.len());
        Field {
            ncomp: self.ncomp,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Valence {
    Scalar,
    OneForm,
    Sym2,
}

impl Valence {
    pub fn ncomp(self, dim: usize) -> usize {
        match self {
            Valence::Scalar => 1,
            Valence::OneForm => dim,
            Valence::Sym2 => dim * (dim + 1) / 2,
        }
    }
}

/// Upper-triangle pairs `(i, j)` with `i <= j` in storage order.
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

/// Storage slot of the symmetric component `(i, j)`.
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// A valence-tagged field owned by one manifold context.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub valence: Valence,
    pub dim: usize,
    pub context_id: u64,
    pub values: Field,
}

impl TensorField {
    pub fn new(valence: Valence, dim: usize, context_id: u64, values: Field) -> Self {
        assert_eq!(values.ncomp, valence.ncomp(dim), "component count mismatch");
        TensorField {
            valence,
            dim,
            context_id,
            values,
        }
    }

    pub fn zeros(valence: Valence, dim: usize, context_id: u64, npts: usize) -> Self {
        Self::new(valence, dim, context_id, Field::zeros(npts, valence.ncomp(dim)))
    }

    pub fn npts(&self) -> usize {
        self.values.npts()
    }

    pub fn at(&self, p: usize) -> &[f64] {
        self.values.at(p)
    }

    /// Symmetric matrix of a sym2 field at sample `p`.
    pub fn matrix_at(&self, p: usize) -> Vec<Vec<f64>> {
        assert_eq!(self.valence, Valence::Sym2);
        let n = self.dim;
        let s = self.values.at(p);
        (0..n)
            .map(|i| (0..n).map(|j| s[sym_index(n, i, j)]).collect())
            .collect()
    }

    pub fn with_values(&self, values: Field) -> Self {
        Self::new(self.valence, self.dim, self.context_id, values)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.with_values(self.values.scaled(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.valence, other.valence);
        self.with_values(self.values.add(&other.values))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.valence, other.valence);
        self.with_values(self.values.sub(&other.values))
    }

    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.valence, other.valence);
        self.with_values(self.values.axpy(s, &other.values))
    }

    /// Largest absolute component over the listed samples (NaN propagates).
    pub fn sup_over(&self, samples: &[usize]) -> f64 {
        crate::reduce::sup_abs(samples.iter().flat_map(|&p| self.values.at(p).iter().copied()))
    }
}

/// Full (non-symmetric) covariant tensor with `dim^rank` components.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tensor {
    pub rank: usize,
    pub n: usize,
    pub f: Field,
}

impl Tensor {
    pub fn from_sym2(h: &TensorField) -> Self {
        assert_eq!(h.valence, Valence::Sym2);
        let n = h.dim;
        let f = Field::from_points(h.npts(), n * n, |p, out| {
            let s = h.values.at(p);
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = s[sym_index(n, i, j)];
                }
            }
        });
        Tensor { rank: 2, n, f }
    }

    pub fn from_one_form(w: &TensorField) -> Self {
        assert_eq!(w.valence, Valence::OneForm);
        Tensor {
            rank: 1,
            n: w.dim,
            f: w.values.clone(),
        }
    }

    /// Symmetrized rank-2 tensor as a sym2 field.
    pub fn to_sym2(&self, context_id: u64) -> TensorField {
        assert_eq!(self.rank, 2);
        let n = self.n;
        let pairs = sym_pairs(n);
        let f = Field::from_points(self.f.npts(), pairs.len(), |p, out| {
            let t = self.f.at(p);
            for (s, &(i, j)) in pairs.iter().enumerate() {
                out[s] = 0.5 * (t[i * n + j] + t[j * n + i]);
            }
        });
        TensorField::new(Valence::Sym2, n, context_id, f)
    }

    pub fn to_one_form(&self, context_id: u64) -> TensorField {
        assert_eq!(self.rank, 1);
        TensorField::new(Valence::OneForm, self.n, context_id, self.f.clone())
    }

    pub fn to_scalar(&self, context_id: u64) -> TensorField {
        assert_eq!(self.rank, 0);
        TensorField::new(Valence::Scalar, self.n, context_id, self.f.clone())
    }
}
