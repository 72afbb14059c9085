use serde::{Deserialize, Serialize};

use super::{ChangeDetector, DetectorConfig, DetectorState};

/// HDDM-W confidence levels and EWMA weight.
///
/// The drift confidence is 0.0002 instead of the usual 0.001: with λ = 0.05
/// the weighted bound is loose enough that 0.001 alarms about ten times per
/// 20 stationary Bernoulli(0.2) traces of length 10000.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HddmWConfig {
    pub drift_confidence: f64,
    pub warning_confidence: f64,
    pub lambda: f64,
    pub two_sided: bool,
}

impl Default for HddmWConfig {
    fn default() -> Self {
        Self {
            drift_confidence: 0.0002,
            warning_confidence: 0.005,
            lambda: 0.05,
            two_sided: true,
        }
    }
}

/// Exponentially weighted estimate plus the sum of squared weights that
/// bounds its deviation (McDiarmid).
#[derive(Debug, Clone, Copy)]
struct Ewma {
    estimate: f64,
    weight_sq_sum: f64,
}

impl Ewma {
    const EMPTY: Ewma = Ewma {
        estimate: -1.0,
        weight_sq_sum: 0.0,
    };

    fn is_empty(&self) -> bool {
        self.estimate < 0.0
    }

    fn push(&mut self, value: f64, lambda: f64) {
        if self.is_empty() {
            self.estimate = value;
            self.weight_sq_sum = 1.0;
        } else {
            let decay = 1.0 - lambda;
            self.estimate = lambda * value + decay * self.estimate;
            self.weight_sq_sum = lambda * lambda + decay * decay * self.weight_sq_sum;
        }
    }
}

/// Hoeffding drift detector on weighted moving averages
/// (Frías-Blanco et al., 2015).
#[derive(Debug, Clone)]
pub struct HddmW {
    cfg: HddmWConfig,
    total: Ewma,
    incr_before: Ewma,
    incr_after: Ewma,
    decr_before: Ewma,
    decr_after: Ewma,
    incr_cut: f64,
    decr_cut: f64,
}

impl HddmW {
    pub fn new(cfg: HddmWConfig) -> Self {
        Self {
            cfg,
            total: Ewma::EMPTY,
            incr_before: Ewma::EMPTY,
            incr_after: Ewma::EMPTY,
            decr_before: Ewma::EMPTY,
            decr_after: Ewma::EMPTY,
            incr_cut: f64::INFINITY,
            decr_cut: f64::NEG_INFINITY,
        }
    }

    fn increased(before: &Ewma, after: &Ewma, confidence: f64) -> bool {
        if before.is_empty() || after.is_empty() {
            return false;
        }
        let sum = before.weight_sq_sum + after.weight_sq_sum;
        let bound = (sum * (1.0 / confidence).ln() / 2.0).sqrt();
        after.estimate - before.estimate > bound
    }

    fn epsilon(&self) -> f64 {
        (self.total.weight_sq_sum * (1.0 / self.cfg.drift_confidence).ln() / 2.0).sqrt()
    }

    fn update_increase_monitor(&mut self, value: f64) {
        let eps = self.epsilon();
        if self.total.estimate + eps < self.incr_cut {
            self.incr_cut = self.total.estimate + eps;
            self.incr_before = self.total;
            self.incr_after = Ewma::EMPTY;
        } else {
            self.incr_after.push(value, self.cfg.lambda);
        }
    }

    fn update_decrease_monitor(&mut self, value: f64) {
        let eps = self.epsilon();
        if self.total.estimate - eps > self.decr_cut {
            self.decr_cut = self.total.estimate - eps;
            self.decr_before = self.total;
            self.decr_after = Ewma::EMPTY;
        } else {
            self.decr_after.push(value, self.cfg.lambda);
        }
    }
}

impl ChangeDetector for HddmW {
    fn add(&mut self, value: f64) -> DetectorState {
        self.total.push(value, self.cfg.lambda);
        self.update_increase_monitor(value);
        let state = if Self::increased(&self.incr_before, &self.incr_after, self.cfg.drift_confidence) {
            self.reset();
            return DetectorState::Drift;
        } else if Self::increased(&self.incr_before, &self.incr_after, self.cfg.warning_confidence) {
            DetectorState::Warning
        } else {
            DetectorState::InControl
        };
        self.update_decrease_monitor(value);
        if self.cfg.two_sided
            && Self::increased(&self.decr_after, &self.decr_before, self.cfg.drift_confidence)
        {
            self.reset();
        }
        state
    }

    fn reset(&mut self) {
        *self = Self::new(self.cfg.clone());
    }

    fn accepts(&self, value: f64) -> bool {
        (0.0..=1.0).contains(&value)
    }

    fn config(&self) -> DetectorConfig {
        DetectorConfig::HddmW(self.cfg.clone())
    }
}
