use std::f64::consts::PI;

use super::*;
use crate::config::{ModelConfig, ModelKind, ParamValue};
use crate::geometry::make_model;
use crate::grid::DerivativeBackend;
use crate::operators::LichnerowiczVariant;

fn flat(n: usize, res: usize) -> ManifoldContext {
    make_model(&ModelConfig::new(ModelKind::FlatTorus, n, res)).unwrap()
}

fn lap_l() -> OperatorId {
    OperatorId::lichnerowicz(LichnerowiczVariant::General)
}

/// `4π² kᵀG⁻¹k` for every mode of the grid, repeated `mult` times, sorted.
fn fourier_prediction(res: usize, n: usize, ginv_diag: &[f64], mult: usize) -> Vec<f64> {
    let half = (res as i64 - 1) / 2;
    let mut out = Vec::new();
    for q in 0..res.pow(n as u32) {
        let mut rem = q;
        let mut v = 0.0;
        for a in 0..n {
            let k = (rem % res) as i64 - half;
            rem /= res;
            v += ginv_diag[a] * (k * k) as f64;
        }
        for _ in 0..mult {
            out.push(4.0 * PI * PI * v);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

#[test]
fn scalar_laplacian_blocks_match_fourier() {
    let ctx = flat(2, 17);
    let h = assemble(&ctx, OperatorId::new(OperatorName::ScalarLaplacian)).unwrap();
    let got = full_spectrum(&h, SpectralBackend::FourierBlock).unwrap();
    let want = fourier_prediction(17, 2, &[1.0, 1.0], 1);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10 * b.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn lichnerowicz_flat_multiplicity_three() {
    let ctx = flat(2, 17);
    let h = assemble(&ctx, lap_l()).unwrap();
    let got = full_spectrum(&h, SpectralBackend::FourierBlock).unwrap();
    let want = fourier_prediction(17, 2, &[1.0, 1.0], 3);
    assert_eq!(got.len(), want.len());
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-8 * b.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn anisotropic_scalar_spectrum() {
    let cfg = ModelConfig::new(ModelKind::FlatTorus, 2, 13).with_param("g", ParamValue::Array(vec![1.0, 4.0]));
    let ctx = make_model(&cfg).unwrap();
    let h = assemble(&ctx, OperatorId::new(OperatorName::ScalarLaplacian)).unwrap();
    let got = full_spectrum(&h, SpectralBackend::FourierBlock).unwrap();
    let want = fourier_prediction(13, 2, &[1.0, 0.25], 1);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10 * b.max(1.0));
    }
}

#[test]
fn dense_and_block_backends_agree() {
    let ctx = flat(2, 9);
    for op in [lap_l(), OperatorId::new(OperatorName::ScalarLaplacian), OperatorId::new(OperatorName::Hodge1form)] {
        let h = assemble(&ctx, op).unwrap();
        let a = full_spectrum(&h, SpectralBackend::Dense).unwrap();
        let b = full_spectrum(&h, SpectralBackend::FourierBlock).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0), "{op}: {x} vs {y}");
        }
        assert!(h.asymmetry().unwrap() <= 1e-9);
    }
}

#[test]
fn zero_combination_is_zero() {
    let ctx = flat(2, 9);
    let h = assemble_combination(&ctx, &[(1.0, lap_l()), (-1.0, lap_l())]).unwrap();
    assert_eq!(h.dense().unwrap().abs().max(), 0.0);
}

#[test]
fn eigensolve_near_four_pi_squared() {
    let ctx = flat(2, 17);
    let h = assemble(&ctx, lap_l()).unwrap();
    let dec = eigensolve(&h, 12, 4.0 * PI * PI).unwrap();
    assert_eq!(dec.backend, SpectralBackend::FourierBlock);
    for e in &dec.eigenpairs {
        assert!((e.eigenvalue - 4.0 * PI * PI).abs() < 1e-8);
        assert!(e.residual <= 1e-8 * e.eigenvalue + 1e-10);
        assert!((ctx.l2_norm(&e.eigenvector).unwrap() - 1.0).abs() < 1e-10);
        assert!((rayleigh(&ctx, lap_l(), &e.eigenvector).unwrap() - 4.0 * PI * PI).abs() < 1e-8);
    }
    // deterministic order: labels non-decreasing inside the cluster
    let labels: Vec<Vec<i64>> = dec.eigenpairs.iter().map(|e| e.label.clone()).collect();
    let mut sorted = labels.clone();
    sorted.sort();
    assert_eq!(labels, sorted);
    assert_eq!(labels[0], vec![0, 1]);
}

#[test]
fn rough_laplacian_kernel_is_constants() {
    let ctx = flat(2, 9);
    let h = assemble(&ctx, OperatorId::new(OperatorName::RoughLaplacian)).unwrap();
    let dec = eigensolve(&h, 3, -1.0).unwrap();
    for e in &dec.eigenpairs {
        assert!(e.eigenvalue.abs() < 1e-10);
        assert_eq!(e.label, vec![0, 0]);
    }
    let next = eigensolve(&h, 4, -1.0).unwrap();
    assert!(next.eigenpairs[3].eigenvalue > 1.0);
}

#[test]
fn rayleigh_of_mixture_is_mean() {
    let ctx = flat(2, 9);
    let h = assemble(&ctx, lap_l()).unwrap();
    let dec = eigensolve(&h, 24, 6.0 * PI * PI).unwrap();
    let a = dec.eigenpairs.iter().find(|e| (e.eigenvalue - 4.0 * PI * PI).abs() < 1e-6).unwrap();
    let b = dec.eigenpairs.iter().find(|e| (e.eigenvalue - 8.0 * PI * PI).abs() < 1e-6).unwrap();
    let mix = a.eigenvector.add(&b.eigenvector);
    let r = rayleigh(&ctx, lap_l(), &mix).unwrap();
    assert!((r - 6.0 * PI * PI).abs() < 1e-8, "{r}");
    let constant = ctx.sym2_from_fn(|_, m| m[0] = 1.0);
    assert!(rayleigh(&ctx, lap_l(), &constant).unwrap().abs() < 1e-12);
    assert!(rayleigh(&ctx, lap_l(), &ctx.zeros(Valence::Sym2)).is_err());
}

#[test]
fn open_charts_are_rejected() {
    let ctx = make_model(&ModelConfig::new(ModelKind::SphereStereo, 2, 17)).unwrap();
    assert!(matches!(assemble(&ctx, lap_l()), Err(Error::Unsupported(_))));
}

#[test]
fn bumpy_spectral_backend_is_symmetric_and_iterative_matches_dense() {
    let cfg = ModelConfig::new(ModelKind::BumpyTorus, 2, 13).with_backend(DerivativeBackend::Spectral);
    let ctx = make_model(&cfg).unwrap();
    let h = assemble(&ctx, lap_l()).unwrap();
    assert!(h.asymmetry().unwrap() < 1e-9, "{}", h.asymmetry().unwrap());
    let dense = eigensolve_with(&h, 4, 30.0, SpectralBackend::Dense).unwrap();
    let iter = eigensolve_with(&h, 4, 30.0, SpectralBackend::Iterative).unwrap();
    for (a, b) in dense.eigenpairs.iter().zip(&iter.eigenpairs) {
        assert!((a.eigenvalue - b.eigenvalue).abs() < 1e-7 * a.eigenvalue.abs().max(1.0));
        assert!(b.residual <= 1e-8 * b.eigenvalue.abs() + 1e-10);
    }
}

#[test]
fn fourier_block_needs_flat_metric() {
    let ctx = make_model(&ModelConfig::new(ModelKind::BumpyTorus, 2, 13)).unwrap();
    let h = assemble(&ctx, lap_l()).unwrap();
    assert!(matches!(
        eigensolve_with(&h, 1, 0.0, SpectralBackend::FourierBlock),
        Err(Error::Unsupported(_))
    ));
}

fn counterexample(ctx: &ManifoldContext) -> TensorField {
    ctx.sym2_from_fn(|x, m| {
        let s = (2.0 * PI * x[0]).sin();
        m[0] = s;
        m[3] = -s;
    })
}

#[test]
fn bochner_koiso_ledger_counterexample() {
    let ctx = flat(2, 17);
    let h0 = counterexample(&ctx);
    let rep = bochner_koiso_report(&ctx, &h0, Some(4.0 * PI * PI)).unwrap();
    let l = &rep.ledger;
    assert!((l.grad_energy - 4.0 * PI * PI).abs() < 1e-8);
    assert!((l.grad_energy_by_parts - l.grad_energy).abs() < 1e-8);
    assert!((l.div_energy - 2.0 * PI * PI).abs() < 1e-8);
    assert!(l.curvature_pairing.abs() < 1e-12);
    assert!((l.l2_norm_sq - 1.0).abs() < 1e-12);
    assert!((rep.stated_residual - 2.0 * PI * PI).abs() < 1e-8);
    assert!((rep.derived_residual.unwrap() - 2.0 * PI * PI).abs() < 1e-8);
    // constant trace-free tensors close both identities
    let c = ctx.sym2_from_fn(|_, m| {
        m[1] = 0.3;
        m[2] = 0.3;
    });
    let rc = bochner_koiso_report(&ctx, &c, Some(0.0)).unwrap();
    assert!(rc.stated_residual.abs() < 1e-12 && rc.derived_residual.unwrap().abs() < 1e-12);
    // pure trace is refused
    let g = ctx.sym2_from_fn(|_, m| {
        m[0] = 1.0;
        m[3] = 1.0;
    });
    assert!(matches!(bochner_koiso_report(&ctx, &g, None), Err(Error::Precondition(_))));
}

#[test]
fn lower_bound_on_flat_eigenpairs() {
    let ctx = flat(2, 9);
    let h = assemble(&ctx, lap_l()).unwrap();
    let dec = eigensolve(&h, 6, 4.0 * PI * PI).unwrap();
    let tf = dec
        .eigenpairs
        .iter()
        .find(|e| ctx.sup(&crate::operators::trace(&ctx, &e.eigenvector).unwrap()) < 1e-12);
    let e = tf.unwrap_or(&dec.eigenpairs[0]);
    let rep = lower_bound_report(&ctx, &e.eigenvector, e.eigenvalue).unwrap();
    assert!(rep.holds);
    assert!(rep.three_lambda.abs() < 1e-12);
    assert!(rep.second_kind_min.abs() < 1e-12 && rep.second_kind_max.abs() < 1e-12);
    let c = ctx.sym2_from_fn(|_, m| m[1] = 1.0);
    let r0 = lower_bound_report(&ctx, &c, 0.0).unwrap();
    assert!(r0.holds && (r0.mu - r0.three_lambda).abs() < 1e-12);
    assert!(matches!(lower_bound_report(&ctx, &counterexample(&ctx), 1.0), Err(Error::Precondition(_))));
}

#[test]
fn rigidity_constant_solutions() {
    let ctx = flat(2, 9);
    for a in [0.5, 1.0, 4.0 * PI * PI + 1.0] {
        for c in [0.0, PI, 2.0] {
            let s = rigidity_solve(&ctx, a, c).unwrap().summary;
            assert!(s.deviation <= 1e-10 * s.expected.abs().max(1.0), "{s:?}");
        }
    }
    let cfg = ModelConfig::new(ModelKind::FlatTorus, 3, 9).with_param("g", ParamValue::Array(vec![1.0, 4.0, 1.0]));
    let ctx3 = make_model(&cfg).unwrap();
    let s = rigidity_solve(&ctx3, 2.0, 2.0).unwrap().summary;
    assert!((s.expected - 1.0).abs() < 1e-15 && s.deviation < 1e-10);
    assert!(matches!(rigidity_solve(&ctx, 0.0, 1.0), Err(Error::Precondition(_))));
    assert!(matches!(rigidity_solve(&ctx, -1.0, 1.0), Err(Error::Precondition(_))));
}

#[test]
fn rigidity_on_bumpy_torus() {
    let ctx = make_model(&ModelConfig::new(ModelKind::BumpyTorus, 2, 17)).unwrap();
    let s = rigidity_solve(&ctx, 1.0, PI).unwrap().summary;
    assert_eq!(s.method, "bicgstab");
    assert!(s.deviation < 1e-10, "{s:?}");
}

#[test]
fn energy_forms_match_strong_forms_on_smooth_fields() {
    let cfg = ModelConfig::new(ModelKind::BumpyTorus, 2, 25).with_backend(DerivativeBackend::Spectral);
    let ctx = make_model(&cfg).unwrap();
    let rnd = crate::random::BandLimited::new(6);
    for op in [lap_l(), OperatorId::new(OperatorName::RoughLaplacian)] {
        let h = rnd.sym2(&ctx);
        let weak = assemble(&ctx, op).unwrap().apply_field(&h).unwrap();
        let strong = crate::operators::apply(&ctx, op, &h).unwrap();
        assert!(ctx.sup_norm(&weak.sub(&strong)) < 1e-6 * ctx.sup_norm(&strong), "{op}");
    }
    let w = rnd.one_form(&ctx);
    let op = OperatorId::new(OperatorName::Hodge1form);
    let weak = assemble(&ctx, op).unwrap().apply_field(&w).unwrap();
    let strong = crate::operators::apply(&ctx, op, &w).unwrap();
    assert!(ctx.sup_norm(&weak.sub(&strong)) < 1e-6 * ctx.sup_norm(&strong));
    let f = rnd.scalar(&ctx);
    let op = OperatorId::new(OperatorName::ScalarLaplacian);
    let weak = assemble(&ctx, op).unwrap().apply_field(&f).unwrap();
    let strong = crate::operators::apply(&ctx, op, &f).unwrap();
    assert!(ctx.sup_norm(&weak.sub(&strong)) < 1e-6 * ctx.sup_norm(&strong));
}

#[test]
fn bumpy_handles_are_symmetric() {
    let cfg = ModelConfig::new(ModelKind::BumpyTorus, 2, 9).with_backend(DerivativeBackend::Spectral);
    let ctx = make_model(&cfg).unwrap();
    for op in [
        OperatorId::new(OperatorName::ScalarLaplacian),
        OperatorId::new(OperatorName::Hodge1form),
        OperatorId::new(OperatorName::RoughLaplacian),
    ] {
        assert!(assemble(&ctx, op).unwrap().asymmetry().unwrap() < 1e-9, "{op}");
    }
    let fd = make_model(&ModelConfig::new(ModelKind::BumpyTorus, 2, 13)).unwrap();
    assert!(assemble(&fd, lap_l()).unwrap().asymmetry().unwrap() < 1e-9);
}
