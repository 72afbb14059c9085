use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ChangeDetector, DetectorConfig, DetectorState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdwinConfig {
    /// Confidence of the cut test.
    pub delta: f64,
    /// Cut points are checked every `clock` elements.
    pub clock: usize,
    /// Buckets kept per exponential-histogram row before merging.
    pub max_buckets: usize,
    /// Minimum length of each sub-window at a cut.
    pub min_window_length: usize,
}

impl Default for AdwinConfig {
    fn default() -> Self {
        Self {
            delta: 0.002,
            clock: 32,
            max_buckets: 5,
            min_window_length: 5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Bucket {
    total: f64,
    variance: f64,
}

/// Adaptive windowing (Bifet and Gavaldà, 2007) over an exponential
/// histogram. Row `i` holds buckets of `2^i` elements, newest first.
#[derive(Debug, Clone)]
pub struct Adwin {
    cfg: AdwinConfig,
    rows: Vec<VecDeque<Bucket>>,
    width: usize,
    total: f64,
    variance: f64,
    time: usize,
}

impl Adwin {
    pub fn new(cfg: AdwinConfig) -> Self {
        Self {
            cfg,
            rows: Vec::new(),
            width: 0,
            total: 0.0,
            variance: 0.0,
            time: 0,
        }
    }

    /// Number of elements in the current window.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn estimation(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    fn insert(&mut self, value: f64) {
        self.width += 1;
        if self.width > 1 {
            let w = self.width as f64;
            let prev_mean = self.total / (w - 1.0);
            self.variance += (w - 1.0) * (value - prev_mean).powi(2) / w;
        }
        self.total += value;
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_front(Bucket {
            total: value,
            variance: 0.0,
        });
        self.compress();
    }

    fn compress(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.rows[i].len() <= self.cfg.max_buckets {
                break;
            }
            let older = self.rows[i].pop_back().expect("row is over capacity");
            let newer = self.rows[i].pop_back().expect("row is over capacity");
            let n = (1u64 << i) as f64;
            let diff = older.total / n - newer.total / n;
            let merged = Bucket {
                total: older.total + newer.total,
                variance: older.variance + newer.variance + n * n * diff * diff / (2.0 * n),
            };
            if i + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[i + 1].push_front(merged);
            i += 1;
        }
    }

    fn delete_oldest(&mut self) {
        let Some(row) = self.rows.iter().rposition(|r| !r.is_empty()) else {
            return;
        };
        let bucket = self.rows[row].pop_back().expect("row is non-empty");
        let n = (1u64 << row) as f64;
        self.width -= 1 << row;
        self.total -= bucket.total;
        if self.width == 0 {
            self.variance = 0.0;
        } else {
            let w = self.width as f64;
            let diff = bucket.total / n - self.total / w;
            self.variance -= bucket.variance + n * w * diff * diff / (n + w);
            self.variance = self.variance.max(0.0);
        }
        while self.rows.last().is_some_and(VecDeque::is_empty) {
            self.rows.pop();
        }
    }

    fn cut_exceeded(&self, n0: f64, n1: f64, mean_diff: f64) -> bool {
        let w = self.width as f64;
        let dd = (2.0 * w.ln() / self.cfg.delta).ln();
        let v = self.variance / w;
        let min = self.cfg.min_window_length as f64;
        let m = 1.0 / (n0 - min + 1.0) + 1.0 / (n1 - min + 1.0);
        let epsilon = (2.0 * m * v * dd).sqrt() + 2.0 / 3.0 * dd * m;
        mean_diff.abs() > epsilon
    }

    /// Finds one significant cut, scanning split points from the oldest end.
    fn has_cut(&self) -> bool {
        let (mut n0, mut u0) = (0.0, 0.0);
        let (mut n1, mut u1) = (self.width as f64, self.total);
        let min = self.cfg.min_window_length as f64;
        let buckets = self
            .rows
            .iter()
            .enumerate()
            .rev()
            .flat_map(|(i, row)| row.iter().rev().map(move |b| ((1u64 << i) as f64, b.total)));
        let count: usize = self.rows.iter().map(VecDeque::len).sum();
        // The newest bucket always stays on the recent side.
        for (size, total) in buckets.take(count.saturating_sub(1)) {
            n0 += size;
            n1 -= size;
            u0 += total;
            u1 -= total;
            if n0 >= min && n1 >= min && self.cut_exceeded(n0, n1, u0 / n0 - u1 / n1) {
                return true;
            }
        }
        false
    }
}

impl ChangeDetector for Adwin {
    fn add(&mut self, value: f64) -> DetectorState {
        self.insert(value);
        self.time += 1;
        let mut changed = false;
        if self.time.is_multiple_of(self.cfg.clock) && self.width > self.cfg.min_window_length {
            while self.width > 0 && self.has_cut() {
                changed = true;
                self.delete_oldest();
            }
        }
        if changed {
            DetectorState::Drift
        } else {
            DetectorState::InControl
        }
    }

    fn reset(&mut self) {
        *self = Self::new(self.cfg.clone());
    }

    fn accepts(&self, value: f64) -> bool {
        value.is_finite()
    }

    fn config(&self) -> DetectorConfig {
        DetectorConfig::Adwin(self.cfg.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(values: impl IntoIterator<Item = f64>) -> (Adwin, Vec<usize>) {
        let mut d = Adwin::new(AdwinConfig::default());
        let fired = values
            .into_iter()
            .enumerate()
            .filter_map(|(t, v)| (d.add(v) == DetectorState::Drift).then_some(t))
            .collect();
        (d, fired)
    }

    #[test]
    fn window_moments_match_direct_computation() {
        let values: Vec<f64> = (0..300).map(|t| ((t * 37) % 11) as f64 / 10.0).collect();
        let mut d = Adwin::new(AdwinConfig {
            clock: usize::MAX,
            ..AdwinConfig::default()
        });
        for &v in &values {
            d.add(v);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        assert_eq!(d.width(), 300);
        assert!((d.estimation() - mean).abs() < 1e-12);
        assert!((d.variance - var).abs() < 1e-9 * var);
    }

    #[test]
    fn histogram_is_logarithmic() {
        let mut d = Adwin::new(AdwinConfig::default());
        for _ in 0..10_000 {
            d.add(0.0);
        }
        let buckets: usize = d.rows.iter().map(VecDeque::len).sum();
        assert!(buckets <= 6 * 14, "{buckets} buckets");
        let counted: usize = d.rows.iter().enumerate().map(|(i, r)| r.len() << i).sum();
        assert_eq!(counted, d.width());
    }

    #[test]
    fn constant_input_never_cuts() {
        let (d, fired) = run(std::iter::repeat_n(0.3, 5000));
        assert!(fired.is_empty());
        assert_eq!(d.width(), 5000);
    }

    #[test]
    fn window_after_cut_holds_only_new_concept() {
        let step = 1000;
        let (d, fired) = run((0..1200).map(|t| f64::from(u8::from(t >= step))));
        let first = fired[0];
        assert!(first >= step && first < step + 64, "{fired:?}");
        // Everything retained is post-step, so the window mean is exactly 1.
        assert!(d.width() <= 1200 - step);
        assert_eq!(d.estimation(), 1.0);
    }
}
