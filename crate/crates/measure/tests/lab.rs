use std::time::Instant;

use clonelab_measure::{lemma_suite, measurement_lab, LabConfig};

#[test]
fn default_lab_passes_every_check() {
    let start = Instant::now();
    let rep = measurement_lab(2024, &LabConfig::default()).unwrap();
    for c in &rep.checks {
        assert!(c.pass, "{c:?}");
    }
    assert_eq!(rep.rounds, 1753);
    eprintln!("lab took {:?}", start.elapsed());
}

#[test]
fn lab_reports_are_reproducible_as_json() {
    let cfg = LabConfig { api_trials: 300, pi_instances: 20, sandwich_instances: 20, ..LabConfig::default() };
    let a = serde_json::to_string(&measurement_lab(5, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&measurement_lab(5, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&measurement_lab(6, &cfg).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn lemma_suite_passes_at_every_dimension() {
    for dims in 2..=8 {
        let rep = lemma_suite(dims as u64, dims, 40).unwrap();
        assert!(rep.all_pass(), "dims {dims}: {:?}", rep.results.iter().filter(|r| !r.pass).collect::<Vec<_>>());
    }
}
