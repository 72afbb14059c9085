//! Bernoulli error-trace simulator.
//!
//! The success probability of each `e_t` follows the error-rate signature of
//! the drift type: a step for sudden drift, a linear ramp for incremental
//! drift, and for gradual drift an alternation between the two rates in which
//! the share of time spent at the new rate grows period by period.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, DriftKind};
use crate::error::{Error, Result};
use crate::trace::ErrorTrace;

/// Number of alternation periods across a gradual transition.
pub const GRADUAL_PERIODS: usize = 4;

/// Error rates before and after the drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    pub base_error: f64,
    pub drift_error: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            base_error: 0.1,
            drift_error: 0.4,
        }
    }
}

impl TraceParams {
    pub fn new(base_error: f64, drift_error: f64) -> Self {
        Self {
            base_error,
            drift_error,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [("base_error", self.base_error), ("drift_error", self.drift_error)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }
}

/// Error probability at timestamp `t`.
pub(crate) fn error_probability(
    kind: DriftKind,
    params: &TraceParams,
    width: usize,
    position: usize,
    t: usize,
) -> f64 {
    let (base, drift) = (params.base_error, params.drift_error);
    if kind == DriftKind::Normal || t < position {
        return base;
    }
    if t >= position + width {
        return drift;
    }
    let offset = (t - position) as f64;
    match kind {
        DriftKind::Incremental => base + (drift - base) * (offset + 1.0) / width as f64,
        DriftKind::Gradual => {
            let periods = GRADUAL_PERIODS as f64;
            let u = offset / width as f64 * periods;
            let period = u.floor();
            let share_new = (period + 1.0) / (periods + 1.0);
            if u - period >= 1.0 - share_new {
                drift
            } else {
                base
            }
        }
        DriftKind::Sudden | DriftKind::Normal => unreachable!("handled above"),
    }
}

/// Simulates the prequential error trace of a model facing one drift.
pub fn simulate_error_trace(
    kind: DriftKind,
    length: usize,
    params: &TraceParams,
    width: usize,
    position: usize,
    seed: u64,
) -> Result<ErrorTrace> {
    params.validate()?;
    if position + width > length {
        return Err(Error::InvalidConfig(format!(
            "drift at {position} with width {width} exceeds trace length {length}"
        )));
    }
    if kind.has_width() != (width > 0) {
        return Err(Error::InvalidConfig(format!(
            "{kind} drift cannot have width {width}"
        )));
    }
    let mut rng = rng_for(seed);
    Ok(ErrorTrace::from_bools((0..length).map(|t| {
        let p = error_probability(kind, params, width, position, t);
        rng.random::<f64>() < p
    })))
}
