use serde::{Deserialize, Serialize};

/// Detection quality against a known drift schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Greedy one-to-one matching in time order: each detection claims the
/// earliest unmatched true drift within `±tolerance`.
pub fn drift_f1(true_drifts: &[usize], detected: &[usize], tolerance: usize) -> DriftScore {
    let mut truth = true_drifts.to_vec();
    truth.sort_unstable();
    let mut found = detected.to_vec();
    found.sort_unstable();
    let mut matched = vec![false; truth.len()];
    let mut tp = 0;
    for &d in &found {
        let hit = truth
            .iter()
            .zip(&matched)
            .position(|(&t, &m)| !m && t.abs_diff(d) <= tolerance);
        if let Some(i) = hit {
            matched[i] = true;
            tp += 1;
        }
    }
    let precision = ratio(tp, found.len());
    let recall = ratio(tp, truth.len());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    DriftScore {
        true_positives: tp,
        false_positives: found.len() - tp,
        false_negatives: truth.len() - tp,
        precision,
        recall,
        f1,
    }
}
