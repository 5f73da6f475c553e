mod common;

use wl1_core::experiments::{run_phase_curve, ExperimentConfig, ExperimentFile};
use wl1_core::model::Strategy;

#[test]
fn below_support_size_and_well_above_threshold() {
    let cfg = ExperimentConfig::new(
        common::k2_model(5),
        Strategy::standard_set(),
        vec![5, 35],
        200,
        2024,
    )
    .unwrap();
    let curve = run_phase_curve(&cfg).unwrap();
    for s in Strategy::standard_set() {
        let label = s.to_string();
        assert_eq!(curve.row(&label, 5).unwrap().rate, 0.0, "{label}");
    }
    assert!(curve.row("optimal", 35).unwrap().rate >= 0.9);
    for r in &curve.rows {
        assert!((0.0..=1.0).contains(&r.rate) && r.halfwidth3 >= 0.0);
        assert_eq!(r.trials, 200);
    }
    assert_eq!(curve.solver_issues, 0);
}

#[test]
fn config_file_runs_reproducibly() {
    let text = r#"{
        "d": 100, "blocks": [5, 10, 15, 70], "alpha": [0.8, 0.3, "2/15", "1/70"],
        "strategies": ["optimal", "merged:1,2,3:optimal"],
        "seed": 5, "m_values": [20, 30], "trials_per_m": 10
    }"#;
    let cfg = ExperimentFile::from_json(text).unwrap().config().unwrap();
    let a = run_phase_curve(&cfg).unwrap();
    let b = run_phase_curve(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let csv = a.to_csv();
    assert!(csv
        .lines()
        .any(|l| l.starts_with("\"merged:1,2,3:optimal\",20,10,")));
    let predicted: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(predicted > 10.0 && predicted < 40.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = r#""d": 100, "blocks": [10, 90], "alpha": [0.5, "5/90"], "strategy": "unit""#;
    for extra in [
        r#""m_values": [0]"#,
        r#""m_values": [101]"#,
        r#""m_values": [10], "trials_per_m": 0"#,
    ] {
        let text = format!("{{{base}, {extra}}}");
        assert!(
            ExperimentFile::from_json(&text).unwrap().config().is_err(),
            "{extra}"
        );
    }
}
