use serde::{Deserialize, Serialize};

use super::{is_binary, ChangeDetector, DetectorConfig, DetectorState};

/// EDDM ratio levels and warm-up.
///
/// The published levels are 0.95 and 0.9. At a base error rate of 0.2 they
/// alarm hundreds of times on a stationary trace, since the distance
/// statistic is noisy and its running maximum only grows; 0.8 and 0.7 keep
/// false alarms rare while ramps are still caught.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EddmConfig {
    /// Errors required before the ratio is tested.
    pub min_errors: usize,
    pub warning_level: f64,
    pub drift_level: f64,
}

impl Default for EddmConfig {
    fn default() -> Self {
        Self {
            min_errors: 30,
            warning_level: 0.8,
            drift_level: 0.7,
        }
    }
}

/// Early Drift Detection Method (Baena-García et al., 2006).
///
/// Monitors the distance between consecutive errors. With `p'` its running
/// mean and `s'` its deviation, the ratio `(p' + 2s') / max(p' + 2s')`
/// falling below the warning or drift level raises the matching alarm. The
/// statistic is undefined until errors accumulate, so the detector stays in
/// control for the first `min_errors` errors, and the maximum is only
/// recorded after that warm-up.
#[derive(Debug, Clone)]
pub struct Eddm {
    cfg: EddmConfig,
    n: usize,
    num_errors: usize,
    last_error_at: usize,
    mean: f64,
    m2: f64,
    max_m2s: f64,
    warning: bool,
}

impl Eddm {
    pub fn new(cfg: EddmConfig) -> Self {
        Self {
            cfg,
            n: 0,
            num_errors: 0,
            last_error_at: 0,
            mean: 0.0,
            m2: 0.0,
            max_m2s: 0.0,
            warning: false,
        }
    }
}

impl ChangeDetector for Eddm {
    fn add(&mut self, value: f64) -> DetectorState {
        self.n += 1;
        if value != 1.0 {
            return if self.warning {
                DetectorState::Warning
            } else {
                DetectorState::InControl
            };
        }
        self.num_errors += 1;
        let distance = (self.n - self.last_error_at) as f64;
        self.last_error_at = self.n;
        let old_mean = self.mean;
        self.mean += (distance - self.mean) / self.num_errors as f64;
        self.m2 += (distance - self.mean) * (distance - old_mean);
        let std = (self.m2 / self.num_errors as f64).sqrt();
        let m2s = self.mean + 2.0 * std;
        self.warning = false;
        if self.num_errors <= self.cfg.min_errors {
            return DetectorState::InControl;
        }
        if m2s > self.max_m2s {
            self.max_m2s = m2s;
            return DetectorState::InControl;
        }
        let ratio = m2s / self.max_m2s;
        if ratio < self.cfg.drift_level {
            self.reset();
            DetectorState::Drift
        } else if ratio < self.cfg.warning_level {
            self.warning = true;
            DetectorState::Warning
        } else {
            DetectorState::InControl
        }
    }

    fn reset(&mut self) {
        *self = Self::new(self.cfg.clone());
    }

    fn accepts(&self, value: f64) -> bool {
        is_binary(value)
    }

    fn config(&self) -> DetectorConfig {
        DetectorConfig::Eddm(self.cfg.clone())
    }
}
