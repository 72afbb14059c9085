use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChangeDetector, DetectorConfig, DetectorState};
use crate::streamgen::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KswinConfig {
    /// Significance of the two-sample test. The common default 0.005 is
    /// calibrated for continuous inputs; on a binary error stream the test
    /// runs at every element and 0.005 alarms almost once per 10000
    /// stationary elements, so the default here is 0.0005.
    pub alpha: f64,
    pub window_size: usize,
    /// Size of the recent sub-window and of the reference sample.
    pub stat_size: usize,
    /// Seed for the reference-sample draw.
    pub seed: u64,
}

impl Default for KswinConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0005,
            window_size: 100,
            stat_size: 30,
            seed: 0,
        }
    }
}

/// Minimum KS statistic, on top of significance, for a drift.
const MIN_STATISTIC: f64 = 0.1;

/// Kolmogorov-Smirnov windowing (Raab et al., 2020).
///
/// Once the window is full, the newest `stat_size` elements are tested
/// against a uniform draw (with replacement) of the same size from the rest.
#[derive(Debug, Clone)]
pub struct Kswin {
    cfg: KswinConfig,
    window: VecDeque<f64>,
    rng: ChaCha8Rng,
}

impl Kswin {
    pub fn new(cfg: KswinConfig) -> Self {
        let rng = rng_for(cfg.seed);
        Self {
            window: VecDeque::with_capacity(cfg.window_size + 1),
            cfg,
            rng,
        }
    }
}

impl ChangeDetector for Kswin {
    fn add(&mut self, value: f64) -> DetectorState {
        let mut state = DetectorState::InControl;
        if self.window.len() >= self.cfg.window_size {
            self.window.pop_front();
            let split = self.window.len() - self.cfg.stat_size;
            let (old, _) = self.window.as_slices();
            let reference: Vec<f64> = if old.len() >= split {
                old[..split].to_vec()
            } else {
                self.window.iter().take(split).copied().collect()
            };
            let sample: Vec<f64> = (0..self.cfg.stat_size)
                .map(|_| *reference.choose(&mut self.rng).expect("reference is non-empty"))
                .collect();
            let recent: Vec<f64> = self.window.iter().skip(split).copied().collect();
            let (stat, p) = ks_two_sample(&sample, &recent);
            if p <= self.cfg.alpha && stat > MIN_STATISTIC {
                state = DetectorState::Drift;
                self.window.drain(..split);
            }
        }
        self.window.push_back(value);
        state
    }

    fn reset(&mut self) {
        *self = Self::new(self.cfg.clone());
    }

    fn accepts(&self, value: f64) -> bool {
        value.is_finite()
    }

    fn config(&self) -> DetectorConfig {
        DetectorConfig::Kswin(self.cfg.clone())
    }
}

/// Two-sample KS statistic of equal-size samples and its exact two-sided
/// p-value.
fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut max_gap) = (0usize, 0usize, 0usize);
    while i < n && j < n {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < n && b[j] <= x {
            j += 1;
        }
        max_gap = max_gap.max(i.abs_diff(j));
    }
    (max_gap as f64 / n as f64, ks_two_sample_pvalue(n, max_gap))
}

/// Exact `P(D ≥ h/n)` for two continuous samples of size `n` under the null:
/// `2 Σ_{j≥1} (-1)^{j+1} C(2n, n - jh) / C(2n, n)`.
pub fn ks_two_sample_pvalue(n: usize, h: usize) -> f64 {
    if h == 0 {
        return 1.0;
    }
    if h > n {
        return 0.0;
    }
    // Ratios C(2n, n-k)/C(2n, n) = Π_{i=1..k} (n-i+1)/(n+i), accumulated in
    // floating point to stay finite for large n.
    let ratio = |k: usize| -> f64 {
        (1..=k).fold(1.0, |acc, i| acc * (n - i + 1) as f64 / (n + i) as f64)
    };
    let mut sum = 0.0;
    let mut j = 1;
    while j * h <= n {
        let term = ratio(j * h);
        sum += if j % 2 == 1 { term } else { -term };
        j += 1;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn pvalue_matches_lattice_path_count() {
        // Oracle: for n = 3, count the C(6,3) = 20 interleavings whose
        // empirical CDF gap reaches h.
        let n = 3usize;
        for h in 1..=n {
            let mut hits = 0;
            for mask in 0u32..64 {
                if mask.count_ones() as usize != n {
                    continue;
                }
                let (mut pos, mut reached) = (0i32, false);
                for bit in 0..2 * n {
                    pos += if mask >> bit & 1 == 1 { 1 } else { -1 };
                    reached |= pos.unsigned_abs() as usize >= h;
                }
                hits += usize::from(reached);
            }
            let expected = hits as f64 / binom(6, 3);
            assert!((ks_two_sample_pvalue(n, h) - expected).abs() < 1e-12, "h = {h}");
        }
    }

    #[test]
    fn pvalue_closed_form_for_maximal_gap() {
        // Full separation: 2 / C(2n, n).
        assert!((ks_two_sample_pvalue(30, 30) - 2.0 / binom(60, 30)).abs() < 1e-25);
        assert_eq!(ks_two_sample_pvalue(30, 0), 1.0);
    }

    #[test]
    fn statistic_of_disjoint_samples_is_one() {
        let (d, p) = ks_two_sample(&[0.0, 0.1, 0.2], &[1.0, 1.1, 1.2]);
        assert_eq!(d, 1.0);
        assert!((p - 0.1).abs() < 1e-12);
        let (d, p) = ks_two_sample(&[0.0, 1.0], &[0.0, 1.0]);
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn detects_a_shift_and_keeps_the_recent_window() {
        let mut d = Kswin::new(KswinConfig::default());
        let fired: Vec<usize> = (0..400)
            .map(|t| if t < 200 { 0.0 } else { 1.0 })
            .enumerate()
            .filter_map(|(t, v)| (d.add(v) == DetectorState::Drift).then_some(t))
            .collect();
        assert!(!fired.is_empty());
        assert!(fired[0] > 200 && fired[0] < 230, "{fired:?}");
        assert!(d.window.len() <= 100);
    }

    #[test]
    fn same_seed_is_deterministic() {
        let values: Vec<f64> = (0..3000).map(|t| ((t * 7919) % 100) as f64 / 100.0).collect();
        let run = || {
            let mut d = Kswin::new(KswinConfig::default());
            values.iter().map(|&v| d.add(v)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
