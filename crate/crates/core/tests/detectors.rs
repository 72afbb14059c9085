use metadrift::detectors::{make_detector, scan, DetectorKind, DetectorState};
use metadrift::streamgen::{simulate_error_trace, DriftKind, TraceParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bernoulli(p: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| f64::from(u8::from(rng.random::<f64>() < p))).collect()
}

fn drifts(kind: DetectorKind, values: &[f64]) -> Vec<usize> {
    let mut d = make_detector(kind.as_str(), None).unwrap();
    scan(&mut d, values.iter().copied())
        .unwrap()
        .into_iter()
        .filter(|s| s.state == DetectorState::Drift)
        .map(|s| s.at)
        .collect()
}

#[test]
fn stationary_false_alarms_are_rare() {
    let traces: Vec<Vec<f64>> = (0..20).map(|s| bernoulli(0.2, 10_000, 1000 + s)).collect();
    let counts: Vec<(DetectorKind, usize)> = DetectorKind::ALL
        .into_iter()
        .map(|kind| (kind, traces.iter().map(|t| drifts(kind, t).len()).sum()))
        .collect();
    assert!(counts.iter().all(|&(_, n)| n <= 5), "{counts:?}");
}

#[test]
fn step_is_caught_quickly() {
    let trace: Vec<f64> = (0..1000).map(|t| f64::from(u8::from(t >= 200))).collect();
    for kind in [DetectorKind::Ddm, DetectorKind::PageHinkley] {
        let first = drifts(kind, &trace)[0];
        assert!((200..250).contains(&first), "{kind} fired at {first}");
    }
    for kind in DetectorKind::ALL {
        assert!(!drifts(kind, &trace).is_empty(), "{kind} missed the step");
    }
}

#[test]
fn warning_precedes_drift_on_ramps() {
    for seed in 0..10 {
        let params = TraceParams::new(0.05, 0.6);
        let trace = simulate_error_trace(DriftKind::Incremental, 6000, &params, 2000, 2000, seed).unwrap();
        let values: Vec<f64> = trace.iter().map(f64::from).collect();
        for kind in [DetectorKind::Ddm, DetectorKind::Eddm] {
            let mut d = make_detector(kind.as_str(), None).unwrap();
            let mut warned_since_reset = false;
            for &v in &values {
                match d.update(v).unwrap().state {
                    DetectorState::Warning => warned_since_reset = true,
                    DetectorState::Drift => {
                        assert!(warned_since_reset, "{kind} seed {seed}: drift without warning");
                        warned_since_reset = false;
                    }
                    DetectorState::InControl => {}
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn alarms_are_deterministic(seed in any::<u64>(), p in 0.0f64..0.6) {
        let values = bernoulli(p, 2000, seed);
        for kind in DetectorKind::ALL {
            prop_assert_eq!(drifts(kind, &values), drifts(kind, &values));
        }
    }

    #[test]
    fn all_zero_trace_is_quiet(len in 1usize..3000) {
        let values = vec![0.0; len];
        for kind in DetectorKind::ALL {
            prop_assert!(drifts(kind, &values).is_empty(), "{}", kind);
        }
    }
}
