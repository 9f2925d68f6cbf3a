use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::config::{ModelConfig, ModelKind, ParamValue};
use crate::geometry::{convention_pin, make_model};
use crate::grid::DerivativeBackend;
use crate::random::BandLimited;

fn flat(n: usize, res: usize) -> ManifoldContext {
    make_model(&ModelConfig::new(ModelKind::FlatTorus, n, res)).unwrap()
}

fn bumpy_spectral(n: usize, res: usize) -> ManifoldContext {
    make_model(&ModelConfig::new(ModelKind::BumpyTorus, n, res).with_backend(DerivativeBackend::Spectral)).unwrap()
}

fn sphere2(res: usize) -> ManifoldContext {
    make_model(&ModelConfig::new(ModelKind::SphereStereo, 2, res)).unwrap()
}

/// Sup over the chart interior, relative to `max(1, sup|b|)`.
fn rel_gap(ctx: &ManifoldContext, a: &TensorField, b: &TensorField) -> f64 {
    ctx.sup_norm(&a.sub(b)) / ctx.sup_norm(b).max(1.0)
}

#[test]
fn pin_selects_one_sign() {
    let pin = convention_pin().unwrap();
    assert_eq!(pin.riemann_sign, -1.0);
    let ev = pin.evidence.as_ref().unwrap();
    assert_eq!(ev.candidates.iter().filter(|c| c.converges).count(), 1);
    assert_eq!(ev.winner(), Some(-1.0));
    let win = ev.candidates.iter().find(|c| c.converges).unwrap();
    assert!(win.slope >= 5.5, "{win:?}");
    assert!((ev.lambda_hat - 1.0).abs() < 1e-4);
}

#[test]
fn operator_ids_round_trip() {
    for name in ["trace", "divergence", "hodge_1form", "lichnerowicz:ricci_identity", "linearized_ricci"] {
        let id: OperatorId = name.parse().unwrap();
        assert_eq!(id.to_string().parse::<OperatorId>().unwrap(), id);
    }
    let l: OperatorId = "lichnerowicz".parse().unwrap();
    assert_eq!(l, OperatorId::lichnerowicz(LichnerowiczVariant::General));
    assert!("trace:general".parse::<OperatorId>().is_err());
    assert!("laplace".parse::<OperatorId>().is_err());
    assert_eq!(OperatorId::new(OperatorName::Divergence).signature(), (Valence::Sym2, Valence::OneForm));
}

#[test]
fn trace_split_round_trip() {
    let ctx = bumpy_spectral(3, 9);
    let h = BandLimited::new(4).sym2(&ctx);
    let (h0, u) = trace_split(&ctx, &h).unwrap();
    assert!(ctx.sup(&trace(&ctx, &h0).unwrap()) < 1e-13);
    let back = h0.axpy(1.0 / 3.0, &scalar_times_metric(&ctx, &u).unwrap());
    assert!(rel_gap(&ctx, &back, &h) < 1e-14);
    let tg = trace(&ctx, &scalar_times_metric(&ctx, &ctx.scalar_from_fn(|_| 1.0)).unwrap()).unwrap();
    assert!(ctx.sup_norm(&tg.sub(&ctx.scalar_from_fn(|_| 3.0))) < 1e-13);
}

#[test]
fn divergence_of_conformal_tensor() {
    let ctx = bumpy_spectral(2, 17);
    let f = BandLimited::new(8).scalar(&ctx);
    let lhs = divergence(&ctx, &scalar_times_metric(&ctx, &f).unwrap()).unwrap();
    let rhs = exterior_d(&ctx, &f).unwrap().scaled(-1.0);
    assert!(rel_gap(&ctx, &lhs, &rhs) < 1e-10);
}

#[test]
fn flat_closed_forms() {
    let ctx = flat(2, 17);
    let w = ctx.one_form_from_fn(|x, o| o[1] = (2.0 * PI * x[0]).sin());
    let sd = sym_derivative(&ctx, &w).unwrap();
    let want = ctx.sym2_from_fn(|x, m| {
        m[1] = 2.0 * PI * (2.0 * PI * x[0]).cos();
    });
    assert!(rel_gap(&ctx, &sd, &want) < 1e-12);

    let h = ctx.sym2_from_fn(|x, m| {
        let s = (2.0 * PI * x[0]).sin();
        m.copy_from_slice(&[s, 0.5 * s, 0.5 * s, -s]);
    });
    let rough = rough_laplacian(&ctx, &h).unwrap();
    assert!(rel_gap(&ctx, &rough, &h.scaled(4.0 * PI * PI)) < 1e-12);
    let lh = lichnerowicz(&ctx, &h, LichnerowiczVariant::General).unwrap();
    assert!(rel_gap(&ctx, &lh, &rough) < 1e-13);

    let w2 = ctx.one_form_from_fn(|x, o| {
        o[0] = (2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).cos();
        o[1] = (4.0 * PI * x[0]).cos();
    });
    let want = ctx.one_form_from_fn(|x, o| {
        o[0] = 4.0 * PI * PI * ((2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).cos());
        o[1] = 16.0 * PI * PI * (4.0 * PI * x[0]).cos();
    });
    assert!(rel_gap(&ctx, &hodge_1form(&ctx, &w2).unwrap(), &want) < 1e-11);
}

#[test]
fn anisotropic_scalar_laplacian() {
    let cfg = ModelConfig::new(ModelKind::FlatTorus, 3, 9).with_param("g", ParamValue::Array(vec![1.0, 4.0, 1.0]));
    let ctx = make_model(&cfg).unwrap();
    let f = ctx.scalar_from_fn(|x| (2.0 * PI * x[1]).sin());
    let lap = scalar_laplacian(&ctx, &f).unwrap();
    assert!(rel_gap(&ctx, &lap, &f.scaled(PI * PI)) < 1e-12);
}

#[test]
fn adjoint_pairs_on_bumpy_torus() {
    let ctx = bumpy_spectral(2, 17);
    let f = BandLimited::new(1).scalar(&ctx);
    let w = BandLimited::new(2).one_form(&ctx);
    let h = BandLimited::new(3).sym2(&ctx);
    let a = ctx.l2_inner(&sym_derivative(&ctx, &w).unwrap(), &h).unwrap();
    let b = ctx.l2_inner(&w, &divergence(&ctx, &h).unwrap()).unwrap();
    assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    let a = ctx.l2_inner(&exterior_d(&ctx, &f).unwrap(), &w).unwrap();
    let b = ctx.l2_inner(&f, &codifferential(&ctx, &w).unwrap()).unwrap();
    assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    let a = ctx.l2_inner(&rough_laplacian(&ctx, &h).unwrap(), &h).unwrap();
    assert!(a > 0.0);
}

#[test]
fn half_space_christoffel_symbols() {
    let ctx = make_model(&ModelConfig::new(ModelKind::HyperbolicHalf, 2, 17)).unwrap();
    let n = 2;
    let gam = |g: &[f64], k: usize, i: usize, j: usize| g[(k * n + i) * n + j];
    for &p in ctx.interior() {
        let y = ctx.grid.coords(p)[1];
        let g = ctx.connection().at(p);
        let tol = 1e-6 / y;
        assert!((gam(g, 1, 0, 0) - 1.0 / y).abs() < tol);
        assert!((gam(g, 0, 0, 1) + 1.0 / y).abs() < tol);
        assert!((gam(g, 0, 1, 0) + 1.0 / y).abs() < tol);
        assert!((gam(g, 1, 1, 1) + 1.0 / y).abs() < tol);
        assert!(gam(g, 0, 0, 0).abs() < tol && gam(g, 1, 0, 1).abs() < tol && gam(g, 0, 1, 1).abs() < tol);
    }
}

#[test]
fn second_kind_operator_at_constant_curvature() {
    for (model, want) in [(ModelKind::SphereStereo, -1.0), (ModelKind::HyperbolicBall, 1.0)] {
        let ctx = make_model(&ModelConfig::new(model, 2, 17)).unwrap();
        let curv = ctx.curvature().unwrap();
        for &p in ctx.interior() {
            for ev in curv.second_kind_spectrum(&ctx, p).unwrap() {
                assert!((ev - want).abs() < 1e-4, "{model:?}: {ev}");
            }
        }
    }
}

#[test]
fn lichnerowicz_variants_agree_on_sphere() {
    let ctx = sphere2(25);
    let h = BandLimited::new(5).sym2(&ctx);
    let general = lichnerowicz(&ctx, &h, LichnerowiczVariant::General).unwrap();
    let reduced = lichnerowicz(&ctx, &h, LichnerowiczVariant::EinsteinReduced).unwrap();
    let ricci = lichnerowicz(&ctx, &h, LichnerowiczVariant::RicciIdentity).unwrap();
    assert!(rel_gap(&ctx, &reduced, &general) < 1e-4);
    assert!(rel_gap(&ctx, &ricci, &general) < 1e-3);
    let g = ctx.field(Valence::Sym2, ctx.metric.g.values.clone());
    let lg = lichnerowicz(&ctx, &g, LichnerowiczVariant::General).unwrap();
    assert!(ctx.sup_norm(&lg) / ctx.sup_norm(&g) < 1e-4);
}

#[test]
fn reduced_variant_refused_off_einstein() {
    let ctx = make_model(&ModelConfig::new(ModelKind::BumpyTorus, 2, 17)).unwrap();
    let h = BandLimited::new(5).sym2(&ctx);
    assert!(matches!(
        lichnerowicz(&ctx, &h, LichnerowiczVariant::EinsteinReduced),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn gateaux_of_metric_direction_vanishes() {
    let flat = flat(2, 9);
    let g = flat.field(Valence::Sym2, flat.metric.g.values.clone());
    assert!(flat.sup_norm(&linearized_ricci_gateaux(&flat, &g, 1e-3).unwrap()) < 1e-12);
    let ctx = sphere2(17);
    let g = ctx.field(Valence::Sym2, ctx.metric.g.values.clone());
    let d = linearized_ricci_gateaux(&ctx, &g, 1e-3).unwrap();
    assert!(ctx.sup_norm(&d) < 1e-6, "{}", ctx.sup_norm(&d));
    assert!(matches!(linearized_ricci_gateaux(&ctx, &g, 0.0), Err(Error::Precondition(_))));
    match linearized_ricci_gateaux(&ctx, &g.scaled(-1.0), 2.0) {
        Err(Error::Precondition(m)) => assert!(m.contains("smaller eps")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn gateaux_matches_formula_on_bumpy_torus() {
    let ctx = bumpy_spectral(2, 17);
    let h = BandLimited::new(9).with_amplitude(0.2).sym2(&ctx);
    let fd = linearized_ricci_gateaux(&ctx, &h, 1e-3).unwrap();
    let formula = linearized_ricci_formula(&ctx, &h).unwrap();
    assert!(rel_gap(&ctx, &fd, &formula) < 1e-5);
}

#[test]
fn apply_dispatches_and_checks_valence() {
    let ctx = flat(2, 9);
    let h = BandLimited::new(1).sym2(&ctx);
    let a = apply(&ctx, OperatorId::new(OperatorName::RoughLaplacian), &h).unwrap();
    assert_eq!(a, rough_laplacian(&ctx, &h).unwrap());
    let f = ctx.scalar_from_fn(|_| 1.0);
    assert!(apply(&ctx, OperatorId::new(OperatorName::Divergence), &f).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operators_are_linear(s1 in 0u64..1000, s2 in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let ctx = bumpy_spectral(2, 9);
        let ops = [
            OperatorId::new(OperatorName::Divergence),
            OperatorId::new(OperatorName::RoughLaplacian),
            OperatorId::lichnerowicz(LichnerowiczVariant::General),
            OperatorId::new(OperatorName::LinearizedRicci),
        ];
        let x = BandLimited::new(s1).sym2(&ctx);
        let y = BandLimited::new(s2).sym2(&ctx);
        for op in ops {
            let lhs = apply(&ctx, op, &x.scaled(a).axpy(b, &y)).unwrap();
            let rhs = apply(&ctx, op, &x).unwrap().scaled(a).axpy(b, &apply(&ctx, op, &y).unwrap());
            prop_assert!(ctx.sup_norm(&lhs.sub(&rhs)) <= 1e-10 * ctx.sup_norm(&rhs).max(1.0));
        }
    }
}
