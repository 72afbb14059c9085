use serde::{Deserialize, Serialize};

use super::{is_binary, ChangeDetector, DetectorConfig, DetectorState};

/// DDM thresholds, in standard deviations above the best observed error rate.
///
/// The textbook setting (30 instances, 2σ/3σ) raises about ten false alarms
/// per 20 stationary Bernoulli(0.2) traces of length 10000, mostly because a
/// minimum recorded from a short prefix is too optimistic. A 200-instance
/// warm-up and a 3.5σ drift level bring that to about one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdmConfig {
    pub min_instances: usize,
    pub warning_level: f64,
    pub drift_level: f64,
}

impl Default for DdmConfig {
    fn default() -> Self {
        Self {
            min_instances: 200,
            warning_level: 2.0,
            drift_level: 3.5,
        }
    }
}

/// Drift Detection Method (Gama et al., 2004).
///
/// Tracks the running error rate `p` and its binomial deviation `s`, and
/// remembers the point where `p + s` was smallest. Warning when
/// `p + s > p_min + w·s_min`, drift when `p + s > p_min + d·s_min`.
#[derive(Debug, Clone)]
pub struct Ddm {
    cfg: DdmConfig,
    n: usize,
    p: f64,
    p_min: f64,
    s_min: f64,
    ps_min: f64,
}

impl Ddm {
    pub fn new(cfg: DdmConfig) -> Self {
        let mut d = Self {
            cfg,
            n: 0,
            p: 0.0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
            ps_min: f64::INFINITY,
        };
        d.reset();
        d
    }
}

impl ChangeDetector for Ddm {
    fn add(&mut self, value: f64) -> DetectorState {
        self.n += 1;
        let n = self.n as f64;
        self.p += (value - self.p) / n;
        let s = (self.p * (1.0 - self.p) / n).sqrt();
        if self.n < self.cfg.min_instances {
            return DetectorState::InControl;
        }
        if self.p + s <= self.ps_min {
            self.p_min = self.p;
            self.s_min = s;
            self.ps_min = self.p + s;
        }
        if self.p + s > self.p_min + self.cfg.drift_level * self.s_min {
            self.reset();
            DetectorState::Drift
        } else if self.p + s > self.p_min + self.cfg.warning_level * self.s_min {
            DetectorState::Warning
        } else {
            DetectorState::InControl
        }
    }

    fn reset(&mut self) {
        self.n = 0;
        self.p = 0.0;
        self.p_min = f64::INFINITY;
        self.s_min = f64::INFINITY;
        self.ps_min = f64::INFINITY;
    }

    fn accepts(&self, value: f64) -> bool {
        is_binary(value)
    }

    fn config(&self) -> DetectorConfig {
        DetectorConfig::Ddm(self.cfg.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_trace_stays_in_control() {
        let mut d = Ddm::new(DdmConfig::default());
        assert!((0..10_000).all(|_| d.add(0.0) == DetectorState::InControl));
    }

    #[test]
    fn step_to_all_errors_fires_quickly() {
        // Oracle: after 200 zeros p_min = s_min = 0, so the first error puts
        // p + s above p_min + 3·s_min.
        let mut d = Ddm::new(DdmConfig::default());
        for _ in 0..200 {
            assert_eq!(d.add(0.0), DetectorState::InControl);
        }
        let delay = (0..50).position(|_| d.add(1.0) == DetectorState::Drift);
        assert_eq!(delay, Some(0));
    }
}
