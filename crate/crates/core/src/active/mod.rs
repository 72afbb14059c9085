//! Streaming application of the meta-detector with entropy-based label
//! queries.
//!
//! Every window emission is classified; a non-normal prediction raises a
//! drift alarm, and an uncertain one is queued for an oracle whose answer is
//! folded back into the detector between emissions. With querying disabled
//! the same loop is the frozen Meta-DD detector.

mod detect;
mod oracle;
mod queue;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use detect::{
    read_query_log, run_active_detection, write_event_log, write_query_log, ActiveDetector, Alarm, DetectionRun,
};
pub use oracle::{GroundTruthOracle, Oracle, ServiceOracle};
pub use queue::{LabelError, LabelQuery, PredictionSummary, QueryQueue, QueryStatus, StatusSnapshot};

use crate::error::{Error, Result};
use crate::metafeat::MetaSample;
use crate::protonet::{sample_loss_and_grad, Adam, MetaDetector};
use crate::streamgen::{DriftKind, NUM_CLASSES};

/// Tolerance on `Σp = 1` accepted by [`entropy`].
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    let total: f64 = p.iter().sum();
    if p.is_empty() || p.iter().any(|&x| x.is_nan() || x < 0.0) || (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::OutOfDomain(format!("not a probability vector: {p:?}")));
    }
    Ok(raw_entropy(p))
}

fn raw_entropy(p: &[f64]) -> f64 {
    // Rounding can give -0.0 or a value just above ln K.
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    if h <= 0.0 {
        0.0
    } else {
        h.min((p.len() as f64).ln())
    }
}

/// How an acquired label changes the detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Running mean of the class prototype in embedding space.
    #[default]
    PrototypeMean,
    /// A few Adam steps on the sample's NLL, then the prototype update.
    PrototypeMeanPlusSgd,
}

impl UpdateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateMode::PrototypeMean => "prototype_mean",
            UpdateMode::PrototypeMeanPlusSgd => "prototype_mean_plus_sgd",
        }
    }
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prototype_mean" | "mean" => Ok(UpdateMode::PrototypeMean),
            "prototype_mean_plus_sgd" | "plus_sgd" | "sgd" => Ok(UpdateMode::PrototypeMeanPlusSgd),
            _ => Err(Error::Unknown {
                what: "update mode",
                name: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    /// Minimum entropy (nats) for a prediction to be worth a label.
    pub entropy_threshold: f64,
    /// Labels that may be requested per stream; `None` is unlimited.
    pub label_budget: Option<usize>,
    pub update_mode: UpdateMode,
    pub sgd_steps: usize,
    pub sgd_learning_rate: f64,
    /// Predicted classes that raise a drift alarm.
    pub alarm_classes: Vec<DriftKind>,
    /// Emissions after which an unanswered query expires.
    pub query_expiry: usize,
    /// Errors ignored after the monitored learner (re)starts, so its
    /// learning curve is not read as a change.
    #[serde(default)]
    pub warmup: usize,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            entropy_threshold: 0.5 * (NUM_CLASSES as f64).ln(),
            label_budget: Some(20),
            update_mode: UpdateMode::PrototypeMean,
            sgd_steps: 5,
            sgd_learning_rate: 1e-3,
            alarm_classes: vec![DriftKind::Sudden, DriftKind::Gradual, DriftKind::Incremental],
            query_expiry: 10,
            warmup: 0,
        }
    }
}

impl ActiveConfig {
    pub fn validate(&self) -> Result<()> {
        let max = (NUM_CLASSES as f64).ln();
        if !(0.0..=max).contains(&self.entropy_threshold) {
            return Err(Error::InvalidConfig(format!(
                "entropy threshold {} outside [0, ln {NUM_CLASSES}]",
                self.entropy_threshold
            )));
        }
        if self.query_expiry == 0 {
            return Err(Error::InvalidConfig("query expiry must be at least one emission".into()));
        }
        if self.sgd_learning_rate.is_nan() || self.sgd_learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("sgd learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn budget_left(&self, spent: usize) -> bool {
        self.label_budget.is_none_or(|b| spent < b)
    }
}

/// Whether a prediction with probabilities `p` should be sent to the oracle.
pub fn should_query(p: &[f64], cfg: &ActiveConfig, spent_budget: usize) -> bool {
    cfg.budget_left(spent_budget) && raw_entropy(p) >= cfg.entropy_threshold
}

/// Folds a labelled meta-sample into the detector.
pub fn apply_label(
    detector: &mut MetaDetector,
    sample: &MetaSample,
    class: DriftKind,
    cfg: &ActiveConfig,
) -> Result<()> {
    if sample.gaps.len() != detector.net.input_dim {
        return Err(Error::DimensionMismatch {
            expected: detector.net.input_dim,
            actual: sample.gaps.len(),
        });
    }
    if cfg.update_mode == UpdateMode::PrototypeMeanPlusSgd {
        let mut adam = Adam::new(cfg.sgd_learning_rate);
        let mut net = detector.net.clone();
        for _ in 0..cfg.sgd_steps {
            let (_, grads) = sample_loss_and_grad(&net, &detector.prototypes, &sample.gaps, class.index())?;
            adam.step(&mut net.params, &grads)?;
        }
        if !net.is_finite() {
            return Err(Error::Training("fine-tuning produced non-finite weights".into()));
        }
        detector.net = net;
    }
    let z = detector.net.embed(&sample.gaps)?;
    detector.prototypes.absorb(class, &z)
}
