//! Partial derivatives along grid axes.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::field::Field;
use crate::grid::{DerivativeBackend, Grid};

/// One-sided half of the antisymmetric central first-derivative stencil.
pub fn central_weights(order: usize) -> &'static [f64] {
    match order {
        2 => &[1.0 / 2.0],
        4 => &[2.0 / 3.0, -1.0 / 12.0],
        6 => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
        8 => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
        _ => panic!("unsupported stencil order {order}"),
    }
}

struct AxisFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `2 pi i k` multipliers in FFT ordering; the even-length Nyquist mode is zeroed.
    symbol: Vec<Complex64>,
}

pub struct Differentiator {
    backend: DerivativeBackend,
    shape: Vec<usize>,
    strides: Vec<usize>,
    spacing: f64,
    periodic: bool,
    weights: &'static [f64],
    ffts: Vec<AxisFft>,
}

impl std::fmt::Debug for Differentiator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Differentiator")
            .field("backend", &self.backend)
            .field("shape", &self.shape)
            .field("spacing", &self.spacing)
            .finish()
    }
}

/// Signed integer wavenumber of FFT bin `j` for length `m`.
pub fn wavenumber(j: usize, m: usize) -> i64 {
    if j <= (m - 1) / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

impl Differentiator {
    pub fn new(grid: &Grid) -> Self {
        let backend = grid.spec.backend;
        let mut ffts = Vec::new();
        if backend == DerivativeBackend::Spectral {
            let mut planner = FftPlanner::new();
            for &m in &grid.shape {
                let period = m as f64 * grid.spacing;
                let symbol = (0..m)
                    .map(|j| {
                        if m % 2 == 0 && j == m / 2 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            let k = wavenumber(j, m) as f64;
                            Complex64::new(0.0, 2.0 * std::f64::consts::PI * k / period)
                        }
                    })
                    .collect();
                ffts.push(AxisFft {
                    forward: planner.plan_fft_forward(m),
                    inverse: planner.plan_fft_inverse(m),
                    symbol,
                });
            }
        }
        Differentiator {
            backend,
            shape: grid.shape.clone(),
            strides: grid.strides.clone(),
            spacing: grid.spacing,
            periodic: grid.is_periodic(),
            weights: central_weights(grid.spec.stencil_order),
            ffts,
        }
    }

    pub fn backend(&self) -> DerivativeBackend {
        self.backend
    }

    /// Derivative of every component along `axis`. On open charts samples
    /// whose stencil leaves the grid are set to NaN.
    pub fn diff(&self, f: &Field, axis: usize) -> Field {
        match self.backend {
            DerivativeBackend::Spectral => self.diff_spectral(f, axis),
            DerivativeBackend::FiniteDifference => self.diff_fd(f, axis),
        }
    }

    fn diff_fd(&self, f: &Field, axis: usize) -> Field {
        let nc = f.ncomp;
        let m = self.shape[axis];
        let stride = self.strides[axis];
        let w = self.weights;
        let r = w.len();
        let inv_h = 1.0 / self.spacing;
        let periodic = self.periodic;
        let mut out = vec![0.0; f.data.len()];
        out.par_chunks_mut(nc).enumerate().for_each(|(p, o)| {
            let i = (p / stride) % m;
            if !periodic && (i < r || i + r >= m) {
                o.iter_mut().for_each(|v| *v = f64::NAN);
                return;
            }
            let base = p - i * stride;
            for (s, ws) in w.iter().enumerate() {
                let s = s + 1;
                let (ip, im) = if periodic {
                    ((i + s) % m, (i + m - s) % m)
                } else {
                    (i + s, i - s)
                };
                let fp = f.at(base + ip * stride);
                let fm = f.at(base + im * stride);
                for c in 0..nc {
                    o[c] += ws * (fp[c] - fm[c]);
                }
            }
            o.iter_mut().for_each(|v| *v *= inv_h);
        });
        Field { ncomp: nc, data: out }
    }

    fn diff_spectral(&self, f: &Field, axis: usize) -> Field {
        let nc = f.ncomp;
        let m = self.shape[axis];
        let stride = self.strides[axis];
        let npts = f.npts();
        let plan = &self.ffts[axis];
        let bases: Vec<usize> = (0..npts).filter(|p| (p / stride).is_multiple_of(m)).collect();
        let lines: Vec<Vec<f64>> = bases
            .par_iter()
            .map(|&base| {
                let mut buf = vec![Complex64::new(0.0, 0.0); m];
                let mut line = vec![0.0; m * nc];
                for c in 0..nc {
                    for (i, b) in buf.iter_mut().enumerate() {
                        *b = Complex64::new(f.data[(base + i * stride) * nc + c], 0.0);
                    }
                    plan.forward.process(&mut buf);
                    for (b, s) in buf.iter_mut().zip(&plan.symbol) {
                        *b *= s;
                    }
                    plan.inverse.process(&mut buf);
                    for (i, b) in buf.iter().enumerate() {
                        line[i * nc + c] = b.re / m as f64;
                    }
                }
                line
            })
            .collect();
        let mut out = vec![0.0; f.data.len()];
        for (base, line) in bases.iter().zip(lines) {
            for i in 0..m {
                let p = base + i * stride;
                out[p * nc..(p + 1) * nc].copy_from_slice(&line[i * nc..(i + 1) * nc]);
            }
        }
        Field { ncomp: nc, data: out }
    }
}
