use std::sync::OnceLock;

use metadrift::active::{run_active_detection, ActiveConfig, GroundTruthOracle, Oracle, QueryStatus};
use metadrift::evalharness::{train_on_corpus, MetaTraining};
use metadrift::metafeat::WindowSpec;
use metadrift::protonet::{Architecture, MetaDetector};
use metadrift::streamgen::{simulate_error_trace, DriftKind, DriftSpec, TraceParams};

fn detector() -> &'static MetaDetector {
    static DET: OnceLock<MetaDetector> = OnceLock::new();
    DET.get_or_init(|| {
        train_on_corpus(WindowSpec::new(25, 100).unwrap(), &MetaTraining::default(), Architecture::Fcn, 5).unwrap()
    })
}

fn normal_trace(len: usize, seed: u64) -> Vec<u8> {
    simulate_error_trace(DriftKind::Normal, len, &TraceParams::new(0.08, 0.08), 0, 0, seed)
        .unwrap()
        .into_inner()
}

fn step_trace(len: usize, at: usize, seed: u64) -> Vec<u8> {
    simulate_error_trace(DriftKind::Sudden, len, &TraceParams::new(0.05, 0.65), 0, at, seed)
        .unwrap()
        .into_inner()
}

fn truth_oracle(drifts: &[DriftSpec]) -> Option<Box<dyn Oracle>> {
    Some(Box::new(GroundTruthOracle::new(drifts)))
}

#[test]
fn stationary_trace_rarely_alarms() {
    // Overlapping emissions make isolated misclassifications unavoidable over
    // long traces; they must stay rare.
    let (mut alarms, mut emissions) = (0, 0);
    for seed in 0..5 {
        let run = run_active_detection(&normal_trace(8000, seed), detector().clone(), &ActiveConfig::default(), None)
            .unwrap();
        assert!(run.queries.is_empty());
        alarms += run.alarms.len();
        emissions += run.emissions;
    }
    assert!(alarms * 20 <= emissions, "{alarms} alarms in {emissions} emissions");
}

#[test]
fn first_emission_of_a_stationary_trace_is_normal() {
    let det = detector();
    for seed in 0..10 {
        let trace = normal_trace(det.window.extent(), seed);
        let run = run_active_detection(&trace, det.clone(), &ActiveConfig::default(), None).unwrap();
        assert_eq!(run.emissions, 1);
        assert!(run.alarms.is_empty(), "seed {seed}");
    }
}

#[test]
fn sudden_step_is_flagged_within_one_extent() {
    let det = detector();
    let extent = det.window.extent();
    for seed in 0..3 {
        let trace = step_trace(3000 + extent, 3000, seed);
        let run = run_active_detection(&trace, det.clone(), &ActiveConfig::default(), None).unwrap();
        let first = run.alarms.first().expect("step went unnoticed");
        assert!(first.timestamp >= 3000, "seed {seed}: alarm before the step at {}", first.timestamp);
    }
}

#[test]
fn zero_budget_matches_the_frozen_detector() {
    let trace = step_trace(5000, 3000, 2);
    let drifts = [DriftSpec::sudden(3000, 0.6)];
    let frozen = run_active_detection(&trace, detector().clone(), &ActiveConfig::default(), None).unwrap();
    let cfg = ActiveConfig {
        label_budget: Some(0),
        ..ActiveConfig::default()
    };
    let active = run_active_detection(&trace, detector().clone(), &cfg, truth_oracle(&drifts)).unwrap();
    assert!(active.queries.is_empty());
    assert_eq!(active.alarms, frozen.alarms);
    assert_eq!(active.detector, frozen.detector);
}

#[test]
fn queries_never_exceed_the_budget() {
    let trace = step_trace(6000, 3000, 3);
    let drifts = [DriftSpec::sudden(3000, 0.6)];
    for budget in [1, 3, 7] {
        let cfg = ActiveConfig {
            label_budget: Some(budget),
            ..ActiveConfig::default()
        };
        let run = run_active_detection(&trace, detector().clone(), &cfg, truth_oracle(&drifts)).unwrap();
        assert!(run.queries.len() <= budget);
        assert_eq!(run.labels_applied, run.queries.len());
        assert!(run.queries.iter().all(|q| q.status == QueryStatus::Answered && q.applied));
    }
}

#[test]
fn prototype_updates_leave_the_network_alone() {
    let trace = step_trace(5000, 3000, 4);
    let drifts = [DriftSpec::sudden(3000, 0.6)];
    let det = detector().clone();
    let run = run_active_detection(&trace, det.clone(), &ActiveConfig::default(), truth_oracle(&drifts)).unwrap();
    assert!(run.labels_applied > 0);
    assert_eq!(run.detector.net, det.net);
    let added: usize = run.detector.prototypes.counts.iter().sum::<usize>() - det.prototypes.counts.iter().sum::<usize>();
    assert_eq!(added, run.labels_applied);
}

#[test]
fn runs_are_reproducible() {
    let trace = step_trace(5000, 3000, 6);
    let drifts = [DriftSpec::sudden(3000, 0.6)];
    let a = run_active_detection(&trace, detector().clone(), &ActiveConfig::default(), truth_oracle(&drifts)).unwrap();
    let b = run_active_detection(&trace, detector().clone(), &ActiveConfig::default(), truth_oracle(&drifts)).unwrap();
    assert_eq!(a.alarms, b.alarms);
    assert_eq!(a.detector, b.detector);
    assert_eq!(a.queries.len(), b.queries.len());
}
