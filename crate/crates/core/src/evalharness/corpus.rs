//! Synthetic meta-corpus: simulated error traces with one drift each.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metafeat::{make_meta_sample, MetaSample, SampleSource, WindowSpec};
use crate::streamgen::{rng_for, simulate_error_trace, DriftKind, TraceParams};

/// Sampling ranges of the simulated traces; each draw is uniform in its range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRanges {
    /// Pre-drift error rate.
    pub base_error: (f64, f64),
    /// Increase in error rate caused by a drift.
    pub severity: (f64, f64),
    /// Transition width of gradual and incremental drifts, as a fraction of
    /// the trace length.
    pub width_fraction: (f64, f64),
    /// Transition midpoint, as a fraction of the trace length.
    pub centre_fraction: (f64, f64),
}

impl Default for TraceRanges {
    fn default() -> Self {
        Self {
            base_error: (0.02, 0.15),
            severity: (0.4, 0.7),
            width_fraction: (0.2, 0.5),
            centre_fraction: (0.5, 0.5),
        }
    }
}

impl TraceRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64), max: f64| 0.0 <= lo && lo <= hi && hi <= max;
        if !ok(self.base_error, 1.0) || !ok(self.severity, 1.0) || !ok(self.width_fraction, 0.8) || !ok(self.centre_fraction, 1.0) {
            return Err(Error::InvalidConfig("corpus ranges must be ordered and in range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub per_class: usize,
    pub window: WindowSpec,
    pub ranges: TraceRanges,
    pub seed: u64,
}

impl CorpusConfig {
    pub fn new(per_class: usize, window: WindowSpec, seed: u64) -> Self {
        Self {
            per_class,
            window,
            ranges: TraceRanges::default(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.per_class == 0 {
            return Err(Error::InvalidConfig("per_class must be at least 1".into()));
        }
        self.ranges.validate()?;
        if self.window.l < 4 {
            return Err(Error::InvalidConfig(
                "need at least 4 gaps so a drift fits inside the extent".into(),
            ));
        }
        Ok(())
    }
}

/// Draw of one trace's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceDraw {
    pub kind: DriftKind,
    pub params: TraceParams,
    pub position: usize,
    pub width: usize,
    pub seed: u64,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a drift of `kind` inside a trace of `length` elements, keeping at
/// least a tenth of the trace on each side of the transition.
pub fn draw_trace<R: Rng + ?Sized>(kind: DriftKind, length: usize, cfg: &CorpusConfig, rng: &mut R) -> TraceDraw {
    let base = uniform(rng, cfg.ranges.base_error);
    let drift = (base + uniform(rng, cfg.ranges.severity)).min(0.95);
    let margin = length / 10;
    let width = if kind.has_width() {
        ((uniform(rng, cfg.ranges.width_fraction) * length as f64) as usize).clamp(2, length - 2 * margin)
    } else {
        0
    };
    let centre = (uniform(rng, cfg.ranges.centre_fraction) * length as f64) as usize;
    let position = match kind {
        DriftKind::Normal => 0,
        _ => centre.saturating_sub(width / 2).clamp(margin, length - margin - width),
    };
    let params = if kind == DriftKind::Normal {
        TraceParams::new(base, base)
    } else {
        TraceParams::new(base, drift)
    };
    TraceDraw {
        kind,
        params,
        position,
        width,
        seed: rng.random(),
    }
}

/// Balanced corpus of `4·per_class` labeled meta-samples, one per simulated
/// trace of exactly `(L + 1)·n` elements.
pub fn build_meta_corpus(cfg: &CorpusConfig) -> Result<Vec<MetaSample>> {
    cfg.validate()?;
    let length = cfg.window.extent();
    let mut rng = rng_for(cfg.seed);
    let draws: Vec<TraceDraw> = (0..cfg.per_class)
        .flat_map(|_| DriftKind::ALL)
        .map(|kind| draw_trace(kind, length, cfg, &mut rng))
        .collect();
    draws
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let trace = simulate_error_trace(d.kind, length, &d.params, d.width, d.position, d.seed)?;
            let mut sample = make_meta_sample(trace.as_slice(), &cfg.window, Some(d.kind))?;
            sample.source = SampleSource {
                stream: format!("sim-{}", cfg.seed),
                offset: i,
            };
            Ok(sample)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_balanced_with_fixed_width() {
        let cfg = CorpusConfig::new(3, WindowSpec::new(5, 10).unwrap(), 1);
        let corpus = build_meta_corpus(&cfg).unwrap();
        assert_eq!(corpus.len(), 12);
        for kind in DriftKind::ALL {
            assert_eq!(corpus.iter().filter(|s| s.label == Some(kind)).count(), 3);
        }
        assert!(corpus.iter().all(|s| s.gaps.len() == 10 && s.window_size == 5));
        assert!(corpus.iter().flat_map(|s| &s.gaps).all(|g| (-1.0..=1.0).contains(g)));
    }

    #[test]
    fn one_per_class() {
        let cfg = CorpusConfig::new(1, WindowSpec::new(2, 8).unwrap(), 2);
        let corpus = build_meta_corpus(&cfg).unwrap();
        let labels: Vec<_> = corpus.iter().map(|s| s.label.unwrap()).collect();
        assert_eq!(labels, DriftKind::ALL.to_vec());
    }

    #[test]
    fn corpus_is_seed_deterministic() {
        let cfg = CorpusConfig::new(5, WindowSpec::new(4, 12).unwrap(), 3);
        assert_eq!(build_meta_corpus(&cfg).unwrap(), build_meta_corpus(&cfg).unwrap());
    }

    #[test]
    fn drifts_fit_inside_the_trace() {
        let cfg = CorpusConfig::new(1, WindowSpec::new(1, 30).unwrap(), 4);
        let mut rng = rng_for(5);
        for _ in 0..500 {
            for kind in DriftKind::ALL {
                let d = draw_trace(kind, 31, &cfg, &mut rng);
                assert!(d.position + d.width <= 31);
                assert!(d.params.drift_error <= 0.95);
            }
        }
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        assert!(build_meta_corpus(&CorpusConfig::new(0, WindowSpec::new(5, 10).unwrap(), 1)).is_err());
        assert!(build_meta_corpus(&CorpusConfig::new(2, WindowSpec::new(5, 2).unwrap(), 1)).is_err());
    }
}
