use serde::{Deserialize, Serialize};

use super::{ChangeDetector, DetectorConfig, DetectorState};

/// HDDM-A confidence levels (smaller is stricter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HddmAConfig {
    pub drift_confidence: f64,
    pub warning_confidence: f64,
    /// Also restart statistics when the mean drops significantly.
    pub two_sided: bool,
}

impl Default for HddmAConfig {
    fn default() -> Self {
        Self {
            drift_confidence: 0.001,
            warning_confidence: 0.005,
            two_sided: true,
        }
    }
}

/// Hoeffding drift detector on moving averages (Frías-Blanco et al., 2015).
///
/// Compares the mean of the whole sequence against the mean up to a cut
/// point chosen where the Hoeffding-corrected mean was lowest; a significant
/// increase is a drift.
#[derive(Debug, Clone)]
pub struct HddmA {
    cfg: HddmAConfig,
    n_min: f64,
    c_min: f64,
    n_max: f64,
    c_max: f64,
    total_n: f64,
    total_c: f64,
}

impl HddmA {
    pub fn new(cfg: HddmAConfig) -> Self {
        Self {
            cfg,
            n_min: 0.0,
            c_min: 0.0,
            n_max: 0.0,
            c_max: 0.0,
            total_n: 0.0,
            total_c: 0.0,
        }
    }

    fn clear(&mut self) {
        self.n_min = 0.0;
        self.c_min = 0.0;
        self.n_max = 0.0;
        self.c_max = 0.0;
        self.total_n = 0.0;
        self.total_c = 0.0;
    }

    fn mean_increased(&self, confidence: f64) -> bool {
        if self.n_min == self.total_n {
            return false;
        }
        let m = (self.total_n - self.n_min) / self.n_min * (1.0 / self.total_n);
        let bound = (m / 2.0 * (2.0 / confidence).ln()).sqrt();
        self.total_c / self.total_n - self.c_min / self.n_min >= bound
    }

    fn mean_decreased(&self, confidence: f64) -> bool {
        if self.n_max == self.total_n {
            return false;
        }
        let m = (self.total_n - self.n_max) / self.n_max * (1.0 / self.total_n);
        let bound = (m / 2.0 * (2.0 / confidence).ln()).sqrt();
        self.c_max / self.n_max - self.total_c / self.total_n >= bound
    }
}

impl ChangeDetector for HddmA {
    fn add(&mut self, value: f64) -> DetectorState {
        self.total_n += 1.0;
        self.total_c += value;
        if self.n_min == 0.0 {
            self.n_min = self.total_n;
            self.c_min = self.total_c;
        }
        if self.n_max == 0.0 {
            self.n_max = self.total_n;
            self.c_max = self.total_c;
        }
        let log_term = (1.0 / self.cfg.drift_confidence).ln();
        let bound_total = (log_term / (2.0 * self.total_n)).sqrt();
        let mean_total = self.total_c / self.total_n;

        let bound_min = (log_term / (2.0 * self.n_min)).sqrt();
        if self.c_min / self.n_min + bound_min >= mean_total + bound_total {
            self.c_min = self.total_c;
            self.n_min = self.total_n;
        }
        let bound_max = (log_term / (2.0 * self.n_max)).sqrt();
        if self.c_max / self.n_max - bound_max <= mean_total - bound_total {
            self.c_max = self.total_c;
            self.n_max = self.total_n;
        }

        let state = if self.mean_increased(self.cfg.drift_confidence) {
            self.clear();
            return DetectorState::Drift;
        } else if self.mean_increased(self.cfg.warning_confidence) {
            DetectorState::Warning
        } else {
            DetectorState::InControl
        };
        if self.cfg.two_sided && self.mean_decreased(self.cfg.drift_confidence) {
            self.clear();
        }
        state
    }

    fn reset(&mut self) {
        self.clear();
    }

    fn accepts(&self, value: f64) -> bool {
        (0.0..=1.0).contains(&value)
    }

    fn config(&self) -> DetectorConfig {
        DetectorConfig::HddmA(self.cfg.clone())
    }
}
