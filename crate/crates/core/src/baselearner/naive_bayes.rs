use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streamgen::Sample;

/// Relative variance smoothing, scaled by the largest feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;
/// Absolute lower bound on the smoothing floor, so it stays positive while
/// every feature is still constant.
pub const MIN_VARIANCE: f64 = 1e-9;

/// Welford running moments of a vector-valued sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *mean;
            *mean += delta / n;
            *m2 += delta * (v - *mean);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance per feature (zero before any sample).
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.m2.len()];
        }
        let n = self.count as f64;
        self.m2.iter().map(|m2| m2 / n).collect()
    }
}

/// Class-conditional posterior for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: u32,
    pub classes: Vec<u32>,
    pub probabilities: Vec<f64>,
}

/// Incremental Gaussian naive Bayes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianNaiveBayes {
    dim: Option<usize>,
    classes: BTreeMap<u32, RunningMoments>,
    overall: RunningMoments,
}

impl GaussianNaiveBayes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn total_count(&self) -> u64 {
        self.overall.count
    }

    pub fn class_moments(&self, class: u32) -> Option<&RunningMoments> {
        self.classes.get(&class)
    }

    pub fn class_counts(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.classes.iter().map(|(&c, m)| (c, m.count))
    }

    /// Current variance floor.
    pub fn variance_floor(&self) -> f64 {
        let max_var = self.overall.variance().into_iter().fold(0.0, f64::max);
        (VAR_SMOOTHING * max_var).max(MIN_VARIANCE)
    }

    /// Smoothed per-feature variance of a class.
    pub fn class_variance(&self, class: u32) -> Option<Vec<f64>> {
        let floor = self.variance_floor();
        self.classes
            .get(&class)
            .map(|m| m.variance().into_iter().map(|v| v.max(floor)).collect())
    }

    pub fn partial_fit(&mut self, sample: &Sample) -> Result<()> {
        let dim = sample.features.len();
        match self.dim {
            Some(expected) if expected != dim => {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: dim,
                })
            }
            Some(_) => {}
            None => {
                self.dim = Some(dim);
                self.overall = RunningMoments::new(dim);
            }
        }
        self.classes
            .entry(sample.label)
            .or_insert_with(|| RunningMoments::new(dim))
            .push(&sample.features);
        self.overall.push(&sample.features);
        Ok(())
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        let dim = self.dim.ok_or(Error::EmptyModel("naive Bayes has no classes"))?;
        if features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: features.len(),
            });
        }
        let floor = self.variance_floor();
        let total = self.overall.count as f64;
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let log_joint: Vec<f64> = self
            .classes
            .values()
            .map(|m| {
                let n = m.count as f64;
                let prior = (n / total).ln();
                let likelihood: f64 = features
                    .iter()
                    .zip(&m.mean)
                    .zip(&m.m2)
                    .map(|((&x, &mu), &m2)| {
                        let var = (m2 / n).max(floor);
                        -0.5 * (ln_2pi + var.ln()) - (x - mu) * (x - mu) / (2.0 * var)
                    })
                    .sum();
                prior + likelihood
            })
            .collect();
        let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_joint.iter().map(|l| (l - max).exp()).collect();
        let norm: f64 = weights.iter().sum();
        let probabilities: Vec<f64> = weights.iter().map(|w| w / norm).collect();
        let classes: Vec<u32> = self.classes.keys().copied().collect();
        let best = probabilities
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > probabilities[best] { i } else { best });
        Ok(Prediction {
            class: classes[best],
            classes,
            probabilities,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(features: &[f64], label: u32) -> Sample {
        Sample {
            features: features.to_vec(),
            label,
        }
    }

    #[test]
    fn single_sample_moments() {
        let mut nb = GaussianNaiveBayes::new();
        nb.partial_fit(&sample(&[1.0, 2.0], 0)).unwrap();
        let m = nb.class_moments(0).unwrap();
        assert_eq!(m.count(), 1);
        assert_eq!(m.mean(), &[1.0, 2.0]);
        assert_eq!(nb.class_variance(0).unwrap(), vec![MIN_VARIANCE; 2]);
    }

    #[test]
    fn two_point_moments() {
        let mut nb = GaussianNaiveBayes::new();
        nb.partial_fit(&sample(&[0.0], 0)).unwrap();
        nb.partial_fit(&sample(&[2.0], 0)).unwrap();
        assert_eq!(nb.class_moments(0).unwrap().mean(), &[1.0]);
        assert_eq!(nb.class_variance(0).unwrap(), vec![1.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut nb = GaussianNaiveBayes::new();
        nb.partial_fit(&sample(&[0.0, 1.0], 0)).unwrap();
        assert!(matches!(
            nb.partial_fit(&sample(&[0.0], 0)),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
        assert!(nb.predict(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn empty_model_cannot_predict() {
        assert!(matches!(
            GaussianNaiveBayes::new().predict(&[0.0]),
            Err(Error::EmptyModel(_))
        ));
    }

    #[test]
    fn incremental_moments_match_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut nb = GaussianNaiveBayes::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|j| 100.0 * j as f64 + rng.random::<f64>() * 7.0).collect();
            nb.partial_fit(&sample(&x, 0)).unwrap();
            rows.push(x);
        }
        // Oracle: two-pass batch moments.
        let n = rows.len() as f64;
        for j in 0..4 {
            let mean: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var: f64 = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let m = nb.class_moments(0).unwrap();
            assert!(((m.mean()[j] - mean) / mean).abs() < 1e-9);
            assert!(((m.variance()[j] - var) / var).abs() < 1e-9);
        }
    }

    #[test]
    fn well_separated_classes_give_confident_posterior() {
        // Means 0 and 10 with unit variance: fit exact two-point moments
        // (points at mean ± 1) per class.
        let mut nb = GaussianNaiveBayes::new();
        for (c, mu) in [(0u32, 0.0), (1, 10.0)] {
            nb.partial_fit(&sample(&[mu - 1.0], c)).unwrap();
            nb.partial_fit(&sample(&[mu + 1.0], c)).unwrap();
        }
        let p = nb.predict(&[0.0]).unwrap();
        // Oracle: density ratio exp(-0/2) / exp(-100/2) with equal priors.
        let expected = 1.0 / (1.0 + (-50.0f64).exp());
        assert_eq!(p.class, 0);
        assert!(p.probabilities[0] > 0.999);
        assert!((p.probabilities[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn midpoint_of_symmetric_classes_is_a_coin_flip() {
        let mut nb = GaussianNaiveBayes::new();
        for (c, mu) in [(0u32, -3.0), (1, 3.0)] {
            nb.partial_fit(&sample(&[mu - 1.0], c)).unwrap();
            nb.partial_fit(&sample(&[mu + 1.0], c)).unwrap();
        }
        let p = nb.predict(&[0.0]).unwrap();
        assert_eq!(p.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn single_class_is_certain() {
        let mut nb = GaussianNaiveBayes::new();
        nb.partial_fit(&sample(&[3.0], 7)).unwrap();
        let p = nb.predict(&[100.0]).unwrap();
        assert_eq!(p.class, 7);
        assert_eq!(p.probabilities, vec![1.0]);
    }
}
