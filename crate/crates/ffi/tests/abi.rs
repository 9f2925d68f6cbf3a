use std::ffi::{c_char, CStr, CString};
use std::ptr;

use cngauge_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { cng_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn flat(res: usize) -> *mut CngModel {
    let name = CString::new("flat_torus").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cng_model_new(name.as_ptr(), 2, res, &mut m) }, CngStatus::Ok);
    m
}

#[test]
fn model_lifecycle_and_shape() {
    let m = flat(9);
    let (mut dim, mut npts) = (0, 0);
    assert_eq!(unsafe { cng_model_shape(m, &mut dim, &mut npts) }, CngStatus::Ok);
    assert_eq!((dim, npts), (2, 81));
    let mut lambda = f64::NAN;
    assert_eq!(unsafe { cng_model_lambda_hat(m, &mut lambda) }, CngStatus::Ok);
    assert!(lambda.abs() < 1e-12);
    unsafe { cng_model_free(m) };
    unsafe { cng_model_free(ptr::null_mut()) };
    let v = unsafe { CStr::from_ptr(cng_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("klein_bottle").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cng_model_new(bad.as_ptr(), 2, 9, &mut m) }, CngStatus::Config);
    assert!(m.is_null());
    assert!(last_error().contains("klein_bottle"));
    let sphere = CString::new("sphere_stereo").unwrap();
    assert_eq!(unsafe { cng_model_new(sphere.as_ptr(), 2, 5, &mut m) }, CngStatus::Config);
    assert_eq!(unsafe { cng_model_new(ptr::null(), 2, 9, &mut m) }, CngStatus::NullPointer);
    let mut out = 0.0;
    assert_eq!(unsafe { cng_model_lambda_hat(ptr::null(), &mut out) }, CngStatus::NullPointer);
    let cfg = CString::new("model = \"flat_torus\"\ndim = 2\nresolution = 9\nbogus = 1\n").unwrap();
    assert_eq!(unsafe { cng_model_from_config(cfg.as_ptr(), &mut m) }, CngStatus::Config);
}

#[test]
fn apply_operator_round_trip() {
    let m = flat(9);
    let npts = 81;
    // f = sin(2πx) + sin(2πy) on the samples i/9, symmetric in the axis order;
    // the scalar Laplacian gives 4π² f
    let w = 2.0 * std::f64::consts::PI / 9.0;
    let vals: Vec<f64> = (0..npts)
        .map(|p| (w * (p / 9) as f64).sin() + (w * (p % 9) as f64).sin())
        .collect();
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { cng_field_from_values(m, CngValence::Scalar, vals.as_ptr(), vals.len(), &mut f) },
        CngStatus::Ok
    );
    let op = CString::new("scalar_laplacian").unwrap();
    let mut lf = ptr::null_mut();
    assert_eq!(unsafe { cng_apply(m, op.as_ptr(), f, &mut lf) }, CngStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { cng_field_len(lf, &mut len) }, CngStatus::Ok);
    let mut out = vec![0.0; len];
    assert_eq!(unsafe { cng_field_copy(lf, out.as_mut_ptr(), 3) }, CngStatus::BufferTooSmall);
    assert_eq!(unsafe { cng_field_copy(lf, out.as_mut_ptr(), len) }, CngStatus::Ok);
    let k2 = 4.0 * std::f64::consts::PI.powi(2);
    let err = out.iter().zip(&vals).map(|(x, y)| (x - k2 * y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
    let wrong = CString::new("divergence").unwrap();
    let mut bad = ptr::null_mut();
    assert_ne!(unsafe { cng_apply(m, wrong.as_ptr(), f, &mut bad) }, CngStatus::Ok);
    unsafe {
        cng_field_free(f);
        cng_field_free(lf);
        cng_model_free(m);
    }
}

#[test]
fn fields_from_other_models_are_refused() {
    let a = flat(9);
    let b = flat(9);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cng_field_random(a, CngValence::Sym2, 3, &mut h) }, CngStatus::Ok);
    let mut s = 0.0;
    assert_eq!(unsafe { cng_sup_norm(a, h, &mut s) }, CngStatus::Ok);
    assert!(s > 0.0);
    assert_eq!(unsafe { cng_sup_norm(b, h, &mut s) }, CngStatus::ForeignField);
    unsafe {
        cng_field_free(h);
        cng_model_free(a);
        cng_model_free(b);
    }
}

#[test]
fn eigenvalues_and_identity_report() {
    let m = flat(9);
    let op = CString::new("lichnerowicz").unwrap();
    let mut buf = [0.0; 3];
    assert_eq!(unsafe { cng_eigenvalues(m, op.as_ptr(), 3, 40.0, buf.as_mut_ptr()) }, CngStatus::Ok);
    for v in buf {
        assert!((v - 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-9);
    }
    unsafe { cng_model_free(m) };
    let name = CString::new("flat_torus").unwrap();
    let mut json = ptr::null_mut();
    let mut passed = -1;
    assert_eq!(
        unsafe { cng_run_identities(name.as_ptr(), 2, 9, 1, &mut json, &mut passed) },
        CngStatus::Ok
    );
    assert_eq!(passed, 1);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { cng_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v["timestamp"].is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cngauge.h")).unwrap();
    for name in [
        "cng_last_error_message",
        "cng_version",
        "cng_model_new",
        "cng_model_from_config",
        "cng_model_free",
        "cng_model_shape",
        "cng_model_lambda_hat",
        "cng_field_from_values",
        "cng_field_random",
        "cng_field_free",
        "cng_field_len",
        "cng_field_copy",
        "cng_apply",
        "cng_sup_norm",
        "cng_eigenvalues",
        "cng_run_identities",
        "cng_string_free",
        "CNG_STATUS_FOREIGN_FIELD",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
