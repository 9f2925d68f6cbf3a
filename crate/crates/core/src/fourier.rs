//! Multi-dimensional FFTs of point-major fields on torus grids.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::diff::wavenumber;
use crate::field::Field;

/// In-place n-D FFT of a row-major complex array (unnormalized both ways).
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let npts: usize = shape.iter().product();
    assert_eq!(data.len(), npts);
    let n = shape.len();
    let mut strides = vec![1; n];
    for a in (0..n.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let mut planner = FftPlanner::new();
    for a in 0..n {
        let m = shape[a];
        let stride = strides[a];
        let plan = if inverse {
            planner.plan_fft_inverse(m)
        } else {
            planner.plan_fft_forward(m)
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for base in (0..npts).filter(|p| (p / stride).is_multiple_of(m)) {
            for i in 0..m {
                buf[i] = data[base + i * stride];
            }
            plan.process(&mut buf);
            for i in 0..m {
                data[base + i * stride] = buf[i];
            }
        }
    }
}

/// Forward transform of each component: `out[c][k]`.
pub fn forward_components(f: &Field, shape: &[usize]) -> Vec<Vec<Complex64>> {
    (0..f.ncomp)
        .map(|c| {
            let mut d: Vec<Complex64> = f.component(c).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
            fft_nd(&mut d, shape, false);
            d
        })
        .collect()
}

/// Inverse of [`forward_components`], keeping real parts.
pub fn inverse_components(spec: Vec<Vec<Complex64>>, shape: &[usize]) -> Field {
    let npts: usize = shape.iter().product();
    let ncomp = spec.len();
    let mut out = Field::zeros(npts, ncomp);
    for (c, mut d) in spec.into_iter().enumerate() {
        fft_nd(&mut d, shape, true);
        let vals: Vec<f64> = d.iter().map(|z| z.re / npts as f64).collect();
        out.set_component(c, &vals);
    }
    out
}

/// Integer wavevector of linear FFT index `q`.
pub fn wavevector(q: usize, shape: &[usize]) -> Vec<i64> {
    let n = shape.len();
    let mut idx = vec![0i64; n];
    let mut rem = q;
    for a in (0..n).rev() {
        idx[a] = wavenumber(rem % shape[a], shape[a]);
        rem /= shape[a];
    }
    idx
}

/// Linear FFT index of a wavevector.
pub fn mode_index(k: &[i64], shape: &[usize]) -> usize {
    let mut q = 0;
    for (a, &m) in shape.iter().enumerate() {
        let j = k[a].rem_euclid(m as i64) as usize;
        q = q * m + j;
    }
    q
}

/// `k` lies in the canonical half-space (first nonzero entry positive).
pub fn is_canonical(k: &[i64]) -> bool {
    match k.iter().find(|&&v| v != 0) {
        Some(&v) => v > 0,
        None => true,
    }
}

/// Representative of `{k, -k}` in the canonical half-space.
pub fn canonical(k: &[i64]) -> Vec<i64> {
    if is_canonical(k) {
        k.to_vec()
    } else {
        k.iter().map(|v| -v).collect()
    }
}
