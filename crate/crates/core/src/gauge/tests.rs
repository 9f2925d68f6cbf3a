use std::f64::consts::PI;

use super::*;
use crate::config::{ModelConfig, ModelKind, ParamValue};
use crate::geometry::make_model;
use crate::random::BandLimited;

fn flat(n: usize, res: usize) -> ManifoldContext {
    make_model(&ModelConfig::new(ModelKind::FlatTorus, n, res)).unwrap()
}

#[test]
fn coupling_equals_cn_for_arbitrary_tensors() {
    let ctx = flat(3, 9);
    for seed in 0..3 {
        let h = BandLimited::new(seed).sym2(&ctx);
        let d = coupling_residual(&ctx, &h).unwrap().sub(&cn_residual(&ctx, &h).unwrap());
        assert!(ctx.sup(&d) <= 1e-12, "{}", ctx.sup(&d));
    }
}

#[test]
fn pure_trace_is_cn_in_two_dimensions() {
    let ctx = flat(2, 17);
    let f = ctx.scalar_from_fn(|x| (2.0 * PI * x[0]).sin());
    let h = scalar_times_metric(&ctx, &f).unwrap();
    assert!(ctx.sup(&cn_residual(&ctx, &h).unwrap()) < 1e-12);
}

#[test]
fn trace_free_sine_is_neither() {
    let ctx = flat(2, 17);
    let h0 = ctx.sym2_from_fn(|x, m| {
        let s = (2.0 * PI * x[0]).sin();
        m[0] = s;
        m[3] = -s;
    });
    let rep = classify(&ctx, &h0, None).unwrap();
    assert_eq!(rep.classification, Some(GaugeClass::Neither));
    assert!(rep.tt_trace_norm < 1e-14);
    // |h₀|_g peaks at √2·max|sin| over the grid samples; |δh₀| peaks at 2π on x = 0
    let smax = (0..17).map(|k| (2.0 * PI * k as f64 / 17.0).sin().abs()).fold(0.0, f64::max);
    assert!((rep.tt_divergence_norm - 2.0 * PI / (2f64.sqrt() * smax)).abs() < 1e-9);
}

#[test]
fn projection_removes_the_wavevector_direction() {
    let m = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let a = DMatrix::from_fn(3, 3, |i, j| Complex64::new((i + j) as f64 + 1.0, (i * j) as f64));
    let p = tt_project(&a, Some(&m));
    for i in 0..3 {
        assert!(p[(0, i)].norm() < 1e-15 && p[(i, 0)].norm() < 1e-15);
    }
    assert!(p.trace().norm() < 1e-14);
    // idempotent
    assert!((tt_project(&p, Some(&m)) - &p).norm() < 1e-14);
}

#[test]
fn tt_synthesis_is_tt() {
    let ctx = flat(3, 9);
    let h = synthesize_tt_torus(&ctx, 5, 2).unwrap();
    assert!(ctx.sup(&divergence(&ctx, &h).unwrap()) < 1e-12);
    assert!(ctx.sup(&trace(&ctx, &h).unwrap()) < 1e-13);
    let rep = classify(&ctx, &h, None).unwrap();
    assert_eq!(rep.classification, Some(GaugeClass::Tt));
    assert!(rep.cn_residual_norm <= rep.tolerance_used);
}

#[test]
fn tt_synthesis_zero_mode_is_constant() {
    let ctx = flat(3, 9);
    let h = synthesize_tt_torus(&ctx, 8, 0).unwrap();
    let h0 = h.at(0).to_vec();
    for p in 0..ctx.npts() {
        for (a, b) in h.at(p).iter().zip(&h0) {
            assert!((a - b).abs() < 1e-14);
        }
    }
    assert!(h0.iter().any(|v| v.abs() > 1e-3));
    assert_eq!(classify(&ctx, &h, None).unwrap().classification, Some(GaugeClass::Tt));
}

#[test]
fn tt_on_anisotropic_torus() {
    let cfg = ModelConfig::new(ModelKind::FlatTorus, 3, 9)
        .with_param("g", ParamValue::Matrix(vec![vec![1.0, 0.2, 0.0], vec![0.2, 2.0, 0.1], vec![0.0, 0.1, 0.5]]));
    let ctx = make_model(&cfg).unwrap();
    let h = synthesize_tt_torus(&ctx, 1, 2).unwrap();
    let rep = classify(&ctx, &h, None).unwrap();
    assert_eq!(rep.classification, Some(GaugeClass::Tt), "{rep:?}");
}

#[test]
fn min_norm_solution_matches_closed_form() {
    // A = c [m̂m̂ᵀ - (I - m̂m̂ᵀ)/(n-1)] is the smallest trace-free A with A m̂ = c m̂
    for n in 2..=4 {
        let m = DVector::from_iterator(n, (0..n).map(|i| 0.3 + i as f64));
        let mhat = &m / m.norm();
        let c = 0.7;
        let a = min_norm_trace_free(&m, &(&m * c)).unwrap();
        let pm = &mhat * mhat.transpose();
        let want = (&pm - (DMatrix::identity(n, n) - &pm) / (n as f64 - 1.0)) * c;
        assert!((a - want).norm() < 1e-12, "n = {n}");
    }
}

#[test]
fn cn_synthesis_three_dimensions() {
    let ctx = flat(3, 17);
    let u = ctx.scalar_from_fn(|x| (2.0 * PI * x[0]).sin());
    let h = synthesize_cn_torus(&ctx, &u, None).unwrap();
    let rep = classify(&ctx, &h, None).unwrap();
    assert!(ctx.sup(&cn_residual(&ctx, &h).unwrap()) <= 1e-10);
    assert!(rep.mean_trace.unwrap().abs() < 1e-12);
    assert_eq!(rep.classification, Some(GaugeClass::CnStrict));
    let (h0, back) = trace_split(&ctx, &h).unwrap();
    assert!(ctx.sup(&back.sub(&u)) < 1e-12);
    // δh₀ = -(1/6) du
    let r = divergence(&ctx, &h0).unwrap().axpy(1.0 / 6.0, &exterior_d(&ctx, &u).unwrap());
    assert!(ctx.sup(&r) < 1e-10);
}

#[test]
fn cn_synthesis_constant_trace() {
    let ctx = flat(3, 9);
    let u = ctx.scalar_from_fn(|_| 1.5);
    let h = synthesize_cn_torus(&ctx, &u, Some((4, 1))).unwrap();
    assert!(ctx.sup(&cn_residual(&ctx, &h).unwrap()) < 1e-12);
    assert!((mean_trace(&ctx, &h).unwrap() - 1.5).abs() < 1e-12);
    let (h0, _) = trace_split(&ctx, &h).unwrap();
    assert!(ctx.sup(&divergence(&ctx, &h0).unwrap()) < 1e-12);
}

#[test]
fn cn_synthesis_two_dimensions_is_divergence_free() {
    let ctx = flat(2, 17);
    let u = ctx.scalar_from_fn(|x| (2.0 * PI * x[0]).sin());
    let h = synthesize_cn_torus(&ctx, &u, Some((2, 0))).unwrap();
    let (h0, _) = trace_split(&ctx, &h).unwrap();
    assert!(ctx.sup(&divergence(&ctx, &h0).unwrap()) < 1e-12);
    assert!(ctx.sup(&cn_residual(&ctx, &h).unwrap()) < 1e-12);
}

#[test]
fn cn_synthesis_mean_trace_is_zero_mode() {
    let ctx = flat(3, 9);
    let u = BandLimited::new(9).scalar(&ctx);
    let h = synthesize_cn_torus(&ctx, &u, None).unwrap();
    let zero_mode = crate::fourier::forward_components(&u.values, &ctx.grid.shape)[0][0].re / ctx.npts() as f64;
    assert!((mean_trace(&ctx, &h).unwrap() - zero_mode).abs() < 1e-12);
    assert!(ctx.sup(&cn_residual(&ctx, &h).unwrap()) < 1e-10);
}

#[test]
fn synthesis_needs_flat_torus() {
    let ctx = make_model(&ModelConfig::new(ModelKind::BumpyTorus, 2, 17)).unwrap();
    assert!(matches!(synthesize_tt_torus(&ctx, 0, 1), Err(Error::Unsupported(_))));
    let chart = make_model(&ModelConfig::new(ModelKind::SphereStereo, 2, 17)).unwrap();
    let h = chart.sym2_from_fn(|x, m| m[0] = x[0]);
    assert_eq!(classify(&chart, &h, None).unwrap().classification, None);
}
