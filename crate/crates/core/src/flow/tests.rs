use std::f64::consts::PI;

use super::*;
use crate::config::{ModelConfig, ModelKind};
use crate::gauge::synthesize_cn_torus;
use crate::geometry::make_model;
use crate::random::BandLimited;
use crate::spectral::{eigensolve, WindowZone};

fn flat(n: usize, res: usize) -> ManifoldContext {
    make_model(&ModelConfig::new(ModelKind::FlatTorus, n, res)).unwrap()
}

fn mode(ctx: &ManifoldContext) -> TensorField {
    ctx.sym2_from_fn(|x, m| {
        let s = (2.0 * PI * x[0]).sin();
        m[0] = s;
        m[3] = -s;
    })
}

#[test]
fn exact_flow_decays_eigentensor() {
    let ctx = flat(2, 13);
    let h0 = mode(&ctx);
    let n0 = ctx.l2_norm(&h0).unwrap();
    let mu = 4.0 * PI * PI;
    for t in [0.01, 0.1] {
        let h = flow_exact(&ctx, &h0, t).unwrap();
        let want = h0.scaled((-mu * t).exp());
        assert!(ctx.sup_norm(&h.sub(&want)) <= 1e-12, "t = {t}");
        assert!((ctx.l2_norm(&h).unwrap() - (-mu * t).exp() * n0).abs() <= 1e-12);
    }
    assert_eq!(flow_exact(&ctx, &h0, 0.0).unwrap(), h0);
    assert!(matches!(flow_exact(&ctx, &h0, -1.0), Err(Error::Precondition(_))));
}

#[test]
fn exact_flow_semigroup() {
    let ctx = flat(2, 9);
    let h0 = BandLimited::new(3).sym2(&ctx);
    let a = flow_exact(&ctx, &flow_exact(&ctx, &h0, 0.01).unwrap(), 0.02).unwrap();
    let b = flow_exact(&ctx, &h0, 0.03).unwrap();
    assert!(ctx.sup_norm(&a.sub(&b)) <= 1e-13);
}

#[test]
fn exact_flow_needs_flat_torus() {
    let bumpy = make_model(&ModelConfig::new(ModelKind::BumpyTorus, 2, 13)).unwrap();
    let h = bumpy.zeros(Valence::Sym2);
    assert!(matches!(flow_exact(&bumpy, &h, 0.1), Err(Error::Unsupported(_))));
    let sphere = make_model(&ModelConfig::new(ModelKind::SphereStereo, 2, 13)).unwrap();
    let h = sphere.zeros(Valence::Sym2);
    assert!(flow_exact(&sphere, &h, 0.1).is_err());
}

#[test]
fn rk4_matches_exact_flow() {
    let ctx = flat(2, 9);
    let h0 = BandLimited::new(11).sym2(&ctx);
    let exact = flow_exact(&ctx, &h0, 0.02).unwrap();
    let errs: Vec<f64> = [4e-4, 2e-4]
        .iter()
        .map(|&dt| {
            let steps = (0.02f64 / dt).round() as usize;
            let traj = flow_rk4(&ctx, &h0, dt, steps, true).unwrap();
            assert!(traj.states.is_none());
            assert_eq!(traj.times.len(), steps + 1);
            ctx.l2_norm(&traj.final_state.sub(&exact)).unwrap()
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!(order > 3.7, "order {order}, errors {errs:?}");
}

#[test]
fn rk4_rejects_unstable_step() {
    let ctx = flat(2, 9);
    let h0 = mode(&ctx);
    let limit = rk4_stable_dt(&ctx).unwrap();
    let rho = 4.0 * PI * PI * 32.0;
    assert!((limit - RK4_STABILITY / rho).abs() < 1e-12 * limit);
    match flow_rk4(&ctx, &h0, 2.0 * limit, 1, true) {
        Err(Error::Precondition(m)) => assert!(m.contains("stability")),
        other => panic!("{other:?}"),
    }
    assert!(flow_rk4(&ctx, &h0, 0.0, 1, true).is_err());
}

#[test]
fn trajectory_monitors_and_csv() {
    let ctx = flat(3, 9);
    let u = ctx.scalar_from_fn(|x| (2.0 * PI * x[1]).cos());
    let h0 = synthesize_cn_torus(&ctx, &u, Some((5, 1))).unwrap();
    let times: Vec<f64> = (0..=4).map(|j| 0.005 * j as f64).collect();
    let traj = flow_exact_trajectory(&ctx, &h0, &times, false).unwrap();
    assert_eq!(traj.states.as_ref().unwrap().len(), 5);
    assert!(traj.label.is_none());
    for (c, m) in traj.cn_residual_norms.iter().zip(&traj.mean_traces) {
        assert!(*c <= 1e-8);
        assert!((m - traj.mean_traces[0]).abs() <= 1e-9);
    }
    assert!(traj.l2_norms.windows(2).all(|w| w[1] <= w[0]));
    let csv = traj.to_csv();
    assert!(csv.starts_with("t,l2_norm,cn_residual,mean_trace\n"));
    assert_eq!(csv.lines().count(), 6);
    assert!(flow_exact_trajectory(&ctx, &h0, &[0.1, 0.2], true).is_err());
}

#[test]
fn bumpy_flow_carries_operator_label() {
    let ctx = make_model(&ModelConfig::new(ModelKind::BumpyTorus, 2, 13)).unwrap();
    let h0 = BandLimited::new(1).with_bandwidth(1).sym2(&ctx);
    let dt = 0.5 * rk4_stable_dt(&ctx).unwrap();
    let traj = flow_rk4(&ctx, &h0, dt, 3, true).unwrap();
    assert_eq!(traj.label.as_deref(), Some(OPERATOR_FLOW_LABEL));
}

#[test]
fn decay_fit_recovers_rate() {
    let ctx = flat(2, 9);
    let h0 = mode(&ctx);
    let mu = 4.0 * PI * PI;
    let times: Vec<f64> = (0..=12).map(|j| 0.004 * j as f64).collect();
    let traj = flow_exact_trajectory(&ctx, &h0, &times, true).unwrap();
    let fit = fit_decay_rate(&traj).unwrap();
    assert!((fit.rate - mu).abs() <= 1e-9 * mu);
    assert!(fit.r_squared > 1.0 - 1e-12);
    let short = flow_exact_trajectory(&ctx, &h0, &times[..5], true).unwrap();
    assert!(matches!(fit_decay_rate(&short), Err(Error::Precondition(_))));
}

#[test]
fn decay_fit_refuses_roundoff_floor() {
    let ctx = flat(2, 9);
    let h0 = mode(&ctx);
    let times: Vec<f64> = (0..=10).map(|j| 0.2 * j as f64).collect();
    let traj = flow_exact_trajectory(&ctx, &h0, &times, true).unwrap();
    assert!(matches!(fit_decay_rate(&traj), Err(Error::Precondition(_))));
}

#[test]
fn decay_check_on_flat_torus() {
    let ctx = flat(2, 9);
    let rep = eigentensor_decay_check(&ctx, 8.5 * PI * PI).unwrap();
    assert!(rep.all_passed);
    assert!(rep.window.empty && rep.window.note.is_some());
    assert_eq!(rep.excluded_kernel, 3);
    let mus: Vec<f64> = rep.entries.iter().map(|e| e.mu).collect();
    assert_eq!(mus.len(), 2);
    assert!((mus[0] - 4.0 * PI * PI).abs() < 1e-8 && (mus[1] - 8.0 * PI * PI).abs() < 1e-8);
    assert!(rep.window.classified.iter().all(|c| c.1 == WindowZone::AtOrAboveThreshold));
    for e in &rep.entries {
        assert!(e.norm_residual < 1e-12);
    }
}

#[test]
fn eigentensors_decay_at_their_eigenvalue() {
    let ctx = flat(2, 9);
    let h = assemble(&ctx, lichnerowicz_id()).unwrap();
    let dec = eigensolve(&h, 3, 16.0 * PI * PI).unwrap();
    for e in &dec.eigenpairs {
        let v = flow_exact(&ctx, &e.eigenvector, 0.01).unwrap();
        let want = e.eigenvector.scaled((-e.eigenvalue * 0.01).exp());
        assert!(ctx.sup_norm(&v.sub(&want)) <= 1e-12);
    }
}
