use std::f64::consts::PI;
use std::fs;
use std::process::Command;

use cngauge::cli::{cli_main, EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK};
use cngauge::verifier::ResidualReport;
use proptest::prelude::*;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["cngauge"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

#[test]
fn flat_identities_exit_zero_with_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flat.json");
    let code = run(&[
        "identities",
        "--model",
        "flat_torus",
        "--dim",
        "2",
        "--res",
        "33",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let report = ResidualReport::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.cases.len(), 9);
    assert!(report.passed());
    assert!(report.timestamp.is_some());
    assert!(report.cases.iter().all(|c| !c.anchor.is_empty()));
}

#[test]
fn spectrum_csv_matches_the_fourier_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec.csv");
    let code = run(&[
        "spectrum",
        "--model",
        "flat_torus",
        "--dim",
        "2",
        "--res",
        "17",
        "--count",
        "15",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue,label,residual"));
    let mut got: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    got.sort_by(f64::total_cmp);
    // |k|² = 0 (×1), 1 (×4), 2 (×4) ... each with multiplicity 3 components
    let mut want = Vec::new();
    for k1 in -2i64..=2 {
        for k2 in -2i64..=2 {
            want.extend([4.0 * PI * PI * (k1 * k1 + k2 * k2) as f64; 3]);
        }
    }
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-8 * w.max(1.0), "{g} vs {w}");
    }
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(run(&["identities", "--model", "sphere_stereo", "--res", "5"]), EXIT_CONFIG);
    assert_eq!(run(&["identities", "--model", "moebius"]), EXIT_CONFIG);
    assert_eq!(run(&["identities", "--bogus-flag"]), EXIT_CONFIG);
    assert_eq!(run(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(run(&["identities", "--model", "sphere_stereo", "--res", "13", "--cases", "I9"]), EXIT_CONFIG);
    assert_eq!(run(&["convergence", "I3", "--model", "flat_torus", "--res", "9", "--resolutions", "9"]), EXIT_CONFIG);
    assert_eq!(run(&["identities", "--threads", "0"]), EXIT_CONFIG);
    assert_eq!(run(&["adjudicate", "commutation", "--model", "bumpy_torus", "--res", "13"]), EXIT_CONFIG);
    assert_eq!(run(&["adjudicate", "bochner-koiso", "--format", "csv"]), EXIT_CONFIG);
    assert_eq!(run(&["report", "/nonexistent/report.json"]), EXIT_CONFIG);
    assert_eq!(run(&["--help"]), EXIT_OK);
}

#[test]
fn failing_reports_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    assert_eq!(run(&["identities", "--model", "flat_torus", "--res", "9", "--out", path.to_str().unwrap()]), EXIT_OK);
    let mut report = ResidualReport::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    report.cases[0].verdict = cngauge::verifier::Verdict::Fail;
    fs::write(&path, report.to_json().unwrap()).unwrap();
    assert_eq!(run(&["report", path.to_str().unwrap(), "--format", "csv", "--out", dir.path().join("r.csv").to_str().unwrap()]), EXIT_ASSERTION);
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("case,resolution,spacing,residual,slope,verdict\n"));
    assert!(csv.contains(",fail\n"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.toml");
    fs::write(&cfg, "model = \"flat_torus\"\ndim = 3\nresolution = 9\n").unwrap();
    let out = dir.path().join("r.json");
    let code = run(&[
        "identities",
        "--config",
        cfg.to_str().unwrap(),
        "--cases",
        "I1,I2",
        "--no-timestamp",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let report = ResidualReport::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.config.dim, 3);
    assert_eq!(report.model.resolutions, vec![9, 17, 25]);
    assert!(report.timestamp.is_none() && report.timings.is_none());
}

#[test]
fn adjudication_and_flow_reports() {
    let dir = tempfile::tempdir().unwrap();
    let bk = dir.path().join("bk.json");
    assert_eq!(
        run(&["adjudicate", "bochner-koiso", "--model", "flat_torus", "--res", "17", "--samples", "4", "--out", bk.to_str().unwrap()]),
        EXIT_OK
    );
    let report = ResidualReport::from_json(&fs::read_to_string(&bk).unwrap()).unwrap();
    assert_eq!(report.adjudications[0].id, "bochner_koiso");
    let flat = dir.path().join("flow.json");
    assert_eq!(
        run(&["flow", "--model", "flat_torus", "--res", "9", "--decay-check", "90", "--out", flat.to_str().unwrap()]),
        EXIT_OK
    );
    let report = ResidualReport::from_json(&fs::read_to_string(&flat).unwrap()).unwrap();
    let flow = report.flow.unwrap();
    let fit = flow.fit.unwrap();
    assert!((fit.rate - 4.0 * PI * PI).abs() < 1e-9 * 4.0 * PI * PI);
    assert!(flow.decay_check.unwrap().all_passed);
    let csv = dir.path().join("flow.csv");
    assert_eq!(
        run(&["flow", "--model", "bumpy_torus", "--dim", "2", "--res", "13", "--integrator", "rk4", "--initial", "random", "--t-end", "0.001", "--format", "csv", "--out", csv.to_str().unwrap()]),
        EXIT_OK
    );
    assert!(fs::read_to_string(&csv).unwrap().starts_with("t,l2_norm,cn_residual,mean_trace\n"));
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cngauge");
    let ok = Command::new(bin).args(["identities", "--res", "9", "--cases", "I1"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("\"schema_version\": 1"));
    let bad = Command::new(bin).args(["identities", "--nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("Usage"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn malformed_configurations_exit_two(
        dim in prop_oneof![Just(0usize), Just(1), Just(5), Just(9)],
        order in prop_oneof![Just(1usize), Just(3), Just(5), Just(10)],
        res in 0usize..5,
        which in 0usize..3,
    ) {
        let dim_s = dim.to_string();
        let order_s = order.to_string();
        let res_s = res.to_string();
        let args: Vec<&str> = match which {
            0 => vec!["identities", "--model", "flat_torus", "--dim", &dim_s],
            1 => vec!["identities", "--model", "sphere_stereo", "--dim", "2", "--res", "17", "--order", &order_s],
            _ => vec!["identities", "--model", "bumpy_torus", "--dim", "2", "--res", &res_s],
        };
        prop_assert_eq!(run(&args), EXIT_CONFIG);
    }
}
