use edgeshift::config::{parse_config_str, ConfigError};
use edgeshift::pipeline::{run_bands, run_bounds, run_expand, run_lower, run_spectrum};
use edgeshift::report::{write_bands_csv, write_lower_csv, write_spectrum_csv, HatRecord};

const COSINE: &str = r#"{
  "operator": {"m": 1, "coefficients": [{"alpha": 1, "beta": 1, "terms": [[0, 1.0, 0.0]]}]},
  "perturbation": {"L1": {"kind": "multiplication", "v": [[1, 1.0, 0.0]]}},
  "disorder": {"s_minus": -1.0, "s_plus": 1.0},
  "discretization": {"scheme": "fourier", "N": 24, "hat_n": 64},
  "sweeps": {"theta_points": 16, "n_bands": 2, "eps_list": [0.05, 0.1, 0.2, 0.4], "max_period": 2, "momenta_per_cell": 4}
}"#;

fn cosine() -> edgeshift::config::Experiment {
    parse_config_str(COSINE).unwrap().build().unwrap()
}

#[test]
fn cosine_pipeline_orders_the_three_estimates() {
    let exp = cosine();
    let band = run_bands::<f64>(&exp).unwrap();
    assert!(band.theta0.abs() < 1e-8);
    let e = run_expand(&exp, &band).unwrap();
    assert_eq!(e.triple.s_star.abs(), 1.0);
    let lower = run_lower(&exp, &e).unwrap();
    let bottoms = run_spectrum::<f64>(&exp).unwrap();
    for (row, bottom) in lower.rows.iter().zip(&bottoms) {
        let upper = e.upper_bound(bottom.eps).unwrap();
        assert!(row.lambda_min <= bottom.inf_estimate + 1e-10);
        assert!(bottom.inf_estimate <= upper + 1e-10);
    }
}

#[test]
fn bounds_report_passes_its_checks() {
    let report = run_bounds::<f64>(&cosine()).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert!(report.all_passed(), "{}", report.summary());
}

#[test]
fn csv_outputs_carry_a_versioned_header() {
    let exp = cosine();
    let band = run_bands::<f64>(&exp).unwrap();
    let e = run_expand(&exp, &band).unwrap();
    let lower = run_lower(&exp, &e).unwrap();
    let bottoms = run_spectrum::<f64>(&exp).unwrap();

    let mut buf = Vec::new();
    write_bands_csv(&mut buf, &band).unwrap();
    write_lower_csv(&mut buf, &HatRecord::from_problem(&lower.hat), &lower.rows).unwrap();
    write_spectrum_csv(&mut buf, &bottoms, 2).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let headers: Vec<&str> = text.lines().filter(|l| l.starts_with('#')).collect();
    assert!(headers.len() >= 3);
    assert!(headers.iter().all(|h| h.starts_with("# edgeshift ")));
    assert!(text.contains("inf_estimate"));
}

#[test]
fn validation_reports_every_violation() {
    let bad = COSINE
        .replace(r#""s_minus": -1.0, "s_plus": 1.0"#, r#""s_minus": 1.0, "s_plus": 1.0"#)
        .replace(r#""N": 24"#, r#""N": 0"#);
    match parse_config_str(&bad) {
        Err(ConfigError::Validation(v)) => assert!(v.len() >= 2, "{v:?}"),
        other => panic!("expected validation errors, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected_with_a_position() {
    let bad = COSINE.replace(r#""disorder""#, r#""disorderr""#);
    assert!(matches!(parse_config_str(&bad), Err(ConfigError::Parse { line: 4, .. })));
}
