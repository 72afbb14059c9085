use serde::{Deserialize, Serialize};

use super::{ChangeDetector, DetectorConfig, DetectorState};

/// Page-Hinkley parameters.
///
/// `delta` and `alpha` are the usual reference values. The threshold is 44
/// rather than the frequently quoted 50: each element can raise the
/// statistic by less than one, so λ = 50 can never flag a switch from
/// all-correct to all-wrong within 50 elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageHinkleyConfig {
    pub min_instances: usize,
    pub delta: f64,
    pub threshold: f64,
    pub alpha: f64,
}

impl Default for PageHinkleyConfig {
    fn default() -> Self {
        Self {
            min_instances: 30,
            delta: 0.005,
            threshold: 44.0,
            alpha: 1.0 - 0.0001,
        }
    }
}

/// Page-Hinkley test for an increase in the mean.
///
/// Keeps `m_T = max(0, α·m_{T-1} + x_T − x̄_T − δ)` and signals drift once
/// `m_T` exceeds the threshold.
#[derive(Debug, Clone)]
pub struct PageHinkley {
    cfg: PageHinkleyConfig,
    n: usize,
    mean: f64,
    sum: f64,
}

impl PageHinkley {
    pub fn new(cfg: PageHinkleyConfig) -> Self {
        Self {
            cfg,
            n: 0,
            mean: 0.0,
            sum: 0.0,
        }
    }

    pub fn statistic(&self) -> f64 {
        self.sum
    }
}

impl ChangeDetector for PageHinkley {
    fn add(&mut self, value: f64) -> DetectorState {
        self.n += 1;
        self.mean += (value - self.mean) / self.n as f64;
        self.sum = (self.cfg.alpha * self.sum + (value - self.mean - self.cfg.delta)).max(0.0);
        if self.n >= self.cfg.min_instances && self.sum > self.cfg.threshold {
            self.reset();
            return DetectorState::Drift;
        }
        DetectorState::InControl
    }

    fn reset(&mut self) {
        self.n = 0;
        self.mean = 0.0;
        self.sum = 0.0;
    }

    fn accepts(&self, value: f64) -> bool {
        value.is_finite()
    }

    fn config(&self) -> DetectorConfig {
        DetectorConfig::PageHinkley(self.cfg.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_never_fires() {
        // Oracle: x − x̄ = 0 exactly, so the clamped sum stays at 0.
        let mut d = PageHinkley::new(PageHinkleyConfig::default());
        for _ in 0..10_000 {
            assert_eq!(d.add(0.5), DetectorState::InControl);
            assert_eq!(d.statistic(), 0.0);
        }
    }

    #[test]
    fn step_delay_matches_direct_cumulative_sum() {
        // Oracle: recompute the statistic with a plain loop over the step.
        let cfg = PageHinkleyConfig::default();
        let trace: Vec<f64> = (0..400).map(|t| f64::from(t >= 200)).collect();
        let (mut mean, mut sum, mut expected) = (0.0, 0.0f64, None);
        for (i, &x) in trace.iter().enumerate() {
            mean += (x - mean) / (i + 1) as f64;
            sum = (cfg.alpha * sum + x - mean - cfg.delta).max(0.0);
            if i + 1 >= cfg.min_instances && sum > cfg.threshold {
                expected = Some(i);
                break;
            }
        }
        let mut d = PageHinkley::new(cfg);
        let fired = trace.iter().position(|&x| d.add(x) == DetectorState::Drift);
        assert_eq!(fired, expected);
        assert!(fired.unwrap() - 200 < 50);
    }
}
