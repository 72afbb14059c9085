//! Error-trace meta-features.
//!
//! A trace is cut into tumbling windows of `n` elements, each window is
//! reduced to its mean error rate, and the meta-features are the `L`
//! differences between consecutive means. A meta-sample therefore consumes
//! the most recent `(L + 1)·n` elements.

mod corpus;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use corpus::{read_meta_corpus, write_meta_corpus};

use crate::error::{Error, Result};
use crate::streamgen::DriftKind;

/// Window length `n`, gap count `L`, and whether gaps lose their sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub n: usize,
    pub l: usize,
    /// Use `|gap|` so that rising and falling error rates look alike.
    #[serde(default)]
    pub sign_agnostic: bool,
}

impl WindowSpec {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        let spec = Self {
            n,
            l,
            sign_agnostic: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l == 0 {
            return Err(Error::InvalidConfig(format!(
                "window spec needs n >= 1 and L >= 1, got n = {}, L = {}",
                self.n, self.l
            )));
        }
        Ok(())
    }

    /// Trace elements consumed by one meta-sample.
    pub fn extent(&self) -> usize {
        (self.l + 1) * self.n
    }
}

/// Where a meta-sample was cut from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSource {
    pub stream: String,
    /// Index one past the last trace element used.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSample {
    pub gaps: Vec<f64>,
    pub label: Option<DriftKind>,
    pub window_size: usize,
    pub source: SampleSource,
}

/// Mean of each full tumbling window of length `n`; a trailing partial
/// window is dropped.
pub fn window_means(trace: &[u8], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("window length must be at least 1".into()));
    }
    if trace.len() < 2 * n {
        return Err(Error::TooShort {
            needed: 2 * n,
            actual: trace.len(),
        });
    }
    Ok(trace.chunks_exact(n).map(|w| window_mean(w, n)).collect())
}

fn window_mean(window: &[u8], n: usize) -> f64 {
    let errors: usize = window.iter().map(|&e| usize::from(e)).sum();
    errors as f64 / n as f64
}

/// Differences between consecutive window means.
pub fn gaps(means: &[f64]) -> Result<Vec<f64>> {
    if means.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: means.len(),
        });
    }
    Ok(means.windows(2).map(|w| w[1] - w[0]).collect())
}

fn finish_gaps(mut gaps: Vec<f64>, spec: &WindowSpec) -> Vec<f64> {
    if spec.sign_agnostic {
        gaps.iter_mut().for_each(|g| *g = g.abs());
    }
    gaps
}

/// Builds a meta-sample from the most recent `(L + 1)·n` elements of `trace`.
pub fn make_meta_sample(trace: &[u8], spec: &WindowSpec, label: Option<DriftKind>) -> Result<MetaSample> {
    spec.validate()?;
    let extent = spec.extent();
    if trace.len() < extent {
        return Err(Error::TooShort {
            needed: extent,
            actual: trace.len(),
        });
    }
    let recent = &trace[trace.len() - extent..];
    let gaps = finish_gaps(gaps(&window_means(recent, spec.n)?)?, spec);
    Ok(MetaSample {
        gaps,
        label,
        window_size: spec.n,
        source: SampleSource {
            stream: String::new(),
            offset: trace.len(),
        },
    })
}

/// Incremental version of [`make_meta_sample`] for a live error stream.
///
/// Emits one unlabeled sample at every window boundary once `L + 1` full
/// windows have been seen, and nothing before that.
#[derive(Debug, Clone)]
pub struct StreamingView {
    spec: WindowSpec,
    stream: String,
    means: VecDeque<f64>,
    current_errors: usize,
    current_len: usize,
    seen: usize,
}

impl StreamingView {
    pub fn new(spec: WindowSpec, stream: impl Into<String>) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            stream: stream.into(),
            means: VecDeque::with_capacity(spec.l + 2),
            current_errors: 0,
            current_len: 0,
            seen: 0,
        })
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    /// Elements consumed since creation (not reset by [`Self::clear`]).
    pub fn seen(&self) -> usize {
        self.seen
    }

    /// Completed window means currently held, oldest first.
    pub fn means(&self) -> Vec<f64> {
        self.means.iter().copied().collect()
    }

    pub fn push(&mut self, error: u8) -> Option<MetaSample> {
        self.seen += 1;
        self.current_errors += usize::from(error);
        self.current_len += 1;
        if self.current_len < self.spec.n {
            return None;
        }
        self.means
            .push_back(self.current_errors as f64 / self.spec.n as f64);
        self.current_errors = 0;
        self.current_len = 0;
        if self.means.len() > self.spec.l + 1 {
            self.means.pop_front();
        }
        if self.means.len() < self.spec.l + 1 {
            return None;
        }
        let raw: Vec<f64> = self
            .means
            .iter()
            .zip(self.means.iter().skip(1))
            .map(|(a, b)| b - a)
            .collect();
        Some(MetaSample {
            gaps: finish_gaps(raw, &self.spec),
            label: None,
            window_size: self.spec.n,
            source: SampleSource {
                stream: self.stream.clone(),
                offset: self.seen,
            },
        })
    }

    /// Forgets all windows, e.g. after the monitored learner was replaced.
    pub fn clear(&mut self) {
        self.means.clear();
        self.current_errors = 0;
        self.current_len = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_means_examples() {
        assert_eq!(window_means(&[0, 0, 1, 1], 2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(window_means(&[1; 100], 25).unwrap(), vec![1.0; 4]);
        assert_eq!(window_means(&[0, 1, 1, 1, 0], 2).unwrap(), vec![0.5, 1.0]);
        assert!(window_means(&[0, 1, 1], 2).is_err());
        assert!(window_means(&[0, 1], 0).is_err());
    }

    #[test]
    fn gaps_examples() {
        let g = gaps(&[0.2, 0.5]).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-15);
        assert_eq!(gaps(&[0.4; 6]).unwrap(), vec![0.0; 5]);
        assert_eq!(gaps(&[0.0, 1.0, 0.0]).unwrap(), vec![1.0, -1.0]);
        assert!(gaps(&[0.3]).is_err());
    }

    #[test]
    fn step_at_window_boundary() {
        let trace: Vec<u8> = [vec![0; 100], vec![1; 100]].concat();
        let spec = WindowSpec::new(50, 3).unwrap();
        let s = make_meta_sample(&trace, &spec, Some(DriftKind::Sudden)).unwrap();
        assert_eq!(s.gaps, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.window_size, 50);
        assert_eq!(s.source.offset, 200);
    }

    #[test]
    fn short_trace_is_rejected() {
        let spec = WindowSpec::new(50, 3).unwrap();
        assert!(matches!(
            make_meta_sample(&[0; 99], &spec, None),
            Err(Error::TooShort { needed: 200, actual: 99 })
        ));
        assert!(WindowSpec::new(0, 3).is_err());
    }

    #[test]
    fn uses_most_recent_extent() {
        let spec = WindowSpec::new(2, 1).unwrap();
        let s = make_meta_sample(&[1, 1, 1, 0, 0, 1, 1], &spec, None).unwrap();
        // Last four elements [0, 0, 1, 1] -> means [0, 1].
        assert_eq!(s.gaps, vec![1.0]);
    }

    #[test]
    fn sign_agnostic_takes_magnitudes() {
        let spec = WindowSpec {
            sign_agnostic: true,
            ..WindowSpec::new(1, 2).unwrap()
        };
        let s = make_meta_sample(&[1, 0, 1], &spec, None).unwrap();
        assert_eq!(s.gaps, vec![1.0, 1.0]);
    }

    #[test]
    fn chunked_means_match_naive_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let trace: Vec<u8> = (0..10_000).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        let means = window_means(&trace, 50).unwrap();
        assert_eq!(means.len(), 200);
        for (i, m) in means.iter().enumerate() {
            let mut count = 0u32;
            for t in i * 50..(i + 1) * 50 {
                count += u32::from(trace[t]);
            }
            assert_eq!(*m, f64::from(count) / 50.0);
        }
    }

    #[test]
    fn normal_gaps_stay_small() {
        // Oracle: a gap is the difference of two independent Binomial(50, 0.2)
        // proportions, sd = sqrt(2 * 0.16 / 50) = 0.08; |gap| >= 0.3 is a
        // 3.75 sd event, probability about 1.8e-4 per element. Across 99 * 50
        // draws the expected count of such gaps is under one.
        use crate::streamgen::{simulate_error_trace, TraceParams};
        let spec = WindowSpec::new(50, 99).unwrap();
        let mut big = 0;
        for seed in 0..50 {
            let trace = simulate_error_trace(
                DriftKind::Normal,
                spec.extent(),
                &TraceParams::new(0.2, 0.2),
                0,
                0,
                seed,
            )
            .unwrap();
            let s = make_meta_sample(trace.as_slice(), &spec, Some(DriftKind::Normal)).unwrap();
            big += s.gaps.iter().filter(|g| g.abs() >= 0.3).count();
        }
        assert!(big <= 5, "{big} large gaps in {} draws", 50 * 99);
    }

    #[test]
    fn streaming_cold_start() {
        let spec = WindowSpec::new(4, 3).unwrap();
        let mut view = StreamingView::new(spec, "s").unwrap();
        let emitted: usize = (0..spec.extent() - 1).filter_map(|_| view.push(1)).count();
        assert_eq!(emitted, 0);
        assert!(view.push(0).is_some());
        let more: usize = (0..spec.n).filter_map(|_| view.push(0)).count();
        assert_eq!(more, 1);
    }

    #[test]
    fn cleared_view_starts_over() {
        let spec = WindowSpec::new(2, 1).unwrap();
        let mut view = StreamingView::new(spec, "s").unwrap();
        for _ in 0..4 {
            view.push(1);
        }
        view.clear();
        assert!((0..3).all(|_| view.push(0).is_none()));
        assert!(view.push(0).is_some());
        assert_eq!(view.seen(), 8);
    }

    proptest! {
        #[test]
        fn streaming_matches_batch(
            trace in prop::collection::vec(0u8..=1, 0..400),
            n in 1usize..8,
            l in 1usize..10,
            sign_agnostic in any::<bool>(),
        ) {
            let spec = WindowSpec { n, l, sign_agnostic };
            let mut view = StreamingView::new(spec, "p").unwrap();
            let mut emissions = 0;
            for (t, &e) in trace.iter().enumerate() {
                if let Some(s) = view.push(e) {
                    emissions += 1;
                    prop_assert_eq!(s.source.offset, t + 1);
                    prop_assert_eq!((t + 1) % n, 0);
                    let batch = make_meta_sample(&trace[..=t], &spec, None).unwrap();
                    prop_assert_eq!(s.gaps, batch.gaps);
                }
            }
            let expected = (trace.len() / n).saturating_sub(l);
            prop_assert_eq!(emissions, expected);
        }

        #[test]
        fn gaps_are_bounded_and_one_shorter(means in prop::collection::vec(0.0f64..=1.0, 2..50)) {
            let g = gaps(&means).unwrap();
            prop_assert_eq!(g.len(), means.len() - 1);
            prop_assert!(g.iter().all(|x| (-1.0..=1.0).contains(x)));
        }

        #[test]
        fn flipping_the_trace_negates_gaps(
            trace in prop::collection::vec(0u8..=1, 60..200),
            n in 1usize..6,
        ) {
            let l = trace.len() / n - 1;
            let spec = WindowSpec::new(n, l).unwrap();
            let flipped: Vec<u8> = trace.iter().map(|e| 1 - e).collect();
            let a = make_meta_sample(&trace, &spec, None).unwrap();
            let b = make_meta_sample(&flipped, &spec, None).unwrap();
            for (x, y) in a.gaps.iter().zip(&b.gaps) {
                prop_assert!((x + y).abs() < 1e-12);
            }
        }
    }
}
