//! Base learner and the prequential (test-then-train) loop that turns a
//! labelled stream into an error trace.

mod naive_bayes;

pub use naive_bayes::{GaussianNaiveBayes, Prediction, RunningMoments, MIN_VARIANCE, VAR_SMOOTHING};
pub use crate::trace::ErrorTrace;

use crate::error::{Error, Result};
use crate::streamgen::Sample;

/// What the monitoring side asks the prequential loop to do after a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adaptation {
    /// Concept looks stable; any warning buffer is discarded.
    Stable,
    /// Possible drift; buffer the sample for retraining.
    Warning,
    /// Drift confirmed; replace the learner with one trained on the buffer.
    Drift,
}

/// Observes every prequential error and decides how the learner adapts.
pub trait ResetHook {
    fn observe(&mut self, t: usize, error: bool) -> Result<Adaptation>;
}

/// Hook that never adapts: the plain learner.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReset;

impl ResetHook for NoReset {
    fn observe(&mut self, _t: usize, _error: bool) -> Result<Adaptation> {
        Ok(Adaptation::Stable)
    }
}

impl<F> ResetHook for F
where
    F: FnMut(usize, bool) -> Result<Adaptation>,
{
    fn observe(&mut self, t: usize, error: bool) -> Result<Adaptation> {
        self(t, error)
    }
}

/// Outcome of a prequential run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrequentialResult {
    pub trace: ErrorTrace,
    pub accuracy: f64,
    /// Timestamps at which the learner was replaced.
    pub resets: Vec<usize>,
}

/// Test-then-train over `stream`.
///
/// Each sample is predicted before it is learned; a sample arriving while
/// the learner is empty (the first one, in particular) is train-only and
/// counts as error 0. Samples seen during a warning are buffered and seed the
/// replacement learner when the hook confirms a drift.
pub fn prequential_run<'a, I, H>(stream: I, hook: &mut H) -> Result<PrequentialResult>
where
    I: IntoIterator<Item = &'a Sample>,
    H: ResetHook + ?Sized,
{
    let mut learner = GaussianNaiveBayes::new();
    let mut trace = ErrorTrace::default();
    let mut buffer: Vec<&Sample> = Vec::new();
    let mut resets = Vec::new();
    for (t, sample) in stream.into_iter().enumerate() {
        let error = if learner.is_empty() {
            false
        } else {
            learner.predict(&sample.features)?.class != sample.label
        };
        trace.push(error);
        learner.partial_fit(sample)?;
        match hook.observe(t, error)? {
            Adaptation::Stable => buffer.clear(),
            Adaptation::Warning => buffer.push(sample),
            Adaptation::Drift => {
                buffer.push(sample);
                learner = GaussianNaiveBayes::new();
                for s in buffer.drain(..) {
                    learner.partial_fit(s)?;
                }
                resets.push(t);
            }
        }
    }
    if trace.is_empty() {
        return Err(Error::TooShort {
            needed: 1,
            actual: 0,
        });
    }
    let accuracy = 1.0 - trace.error_rate();
    Ok(PrequentialResult {
        trace,
        accuracy,
        resets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn length_one_stream() {
        let s = [Sample {
            features: vec![1.0],
            label: 0,
        }];
        let r = prequential_run(&s, &mut NoReset).unwrap();
        assert_eq!(r.trace.as_slice(), &[0]);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(prequential_run(&[], &mut NoReset).is_err());
    }

    #[test]
    fn separable_stream_is_learned() {
        // Oracle: two classes far apart on a single feature are separable
        // once each class has been seen.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stream: Vec<Sample> = (0..1000)
            .map(|_| {
                let label = rng.random_range(0..2u32);
                let centre = if label == 0 { -5.0 } else { 5.0 };
                Sample {
                    features: vec![centre + rng.random::<f64>() - 0.5],
                    label,
                }
            })
            .collect();
        let r = prequential_run(&stream, &mut NoReset).unwrap();
        assert!(r.accuracy >= 0.95, "accuracy {}", r.accuracy);
    }

    #[test]
    fn unlearnable_stream_is_at_chance() {
        // Oracle: labels independent of features; binomial 99.9% interval of
        // the accuracy at n = 2000 is 0.5 ± 0.037.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stream: Vec<Sample> = (0..2000)
            .map(|_| Sample {
                features: vec![rng.random::<f64>(), rng.random::<f64>()],
                label: rng.random_range(0..2u32),
            })
            .collect();
        let r = prequential_run(&stream, &mut NoReset).unwrap();
        assert!((r.accuracy - 0.5).abs() < 0.05, "accuracy {}", r.accuracy);
    }

    #[test]
    fn accuracy_is_one_minus_mean_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stream: Vec<Sample> = (0..500)
            .map(|_| Sample {
                features: vec![rng.random::<f64>()],
                label: rng.random_range(0..3u32),
            })
            .collect();
        let r = prequential_run(&stream, &mut NoReset).unwrap();
        let errors: u32 = r.trace.iter().map(u32::from).sum();
        assert_eq!(r.accuracy, 1.0 - f64::from(errors) / 500.0);
    }

    #[test]
    fn drift_replaces_learner_with_buffered_samples() {
        let stream: Vec<Sample> = (0..10)
            .map(|i| Sample {
                features: vec![i as f64],
                label: u32::from(i >= 5),
            })
            .collect();
        let mut hook = |t: usize, _e: bool| {
            Ok(match t {
                6 | 7 => Adaptation::Warning,
                8 => Adaptation::Drift,
                _ => Adaptation::Stable,
            })
        };
        let r = prequential_run(&stream, &mut hook).unwrap();
        assert_eq!(r.resets, vec![8]);
        // After the reset the learner knows only class 1, so sample 9 is
        // predicted correctly.
        assert_eq!(r.trace.as_slice()[9], 0);
    }
}
