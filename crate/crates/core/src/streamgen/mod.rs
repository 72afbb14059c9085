//! Synthetic data streams with injected concept drift.
//!
//! Two families of generators live here:
//!
//! * labelled feature streams (SEA, rotating hyperplane, AGRAWAL, RBF and
//!   random-tree), fed to a base learner to obtain prequential error traces;
//! * a parametric Bernoulli error-trace simulator that produces the
//!   characteristic error-rate signature of each drift type directly, which
//!   is the default way to build meta-training corpora.
//!
//! Every generator is a pure function of its configuration and seed.

mod concepts;
mod error_sim;
mod io;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use concepts::ConceptStream;
pub use error_sim::{simulate_error_trace, TraceParams, GRADUAL_PERIODS};
pub use io::{read_stream_csv, write_stream_csv, StreamFile};

/// Number of drift classes the meta-detector distinguishes.
pub const NUM_CLASSES: usize = 4;

/// Drift class. The discriminant doubles as the class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    Sudden = 0,
    Gradual = 1,
    Incremental = 2,
    Normal = 3,
}

impl DriftKind {
    pub const ALL: [DriftKind; NUM_CLASSES] = [
        DriftKind::Sudden,
        DriftKind::Gradual,
        DriftKind::Incremental,
        DriftKind::Normal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or_else(|| {
            Error::OutOfDomain(format!("class index {index} not in 0..{NUM_CLASSES}"))
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DriftKind::Sudden => "sudden",
            DriftKind::Gradual => "gradual",
            DriftKind::Incremental => "incremental",
            DriftKind::Normal => "normal",
        }
    }

    /// Whether the drift has a transition region of nonzero width.
    pub fn has_width(self) -> bool {
        matches!(self, DriftKind::Gradual | DriftKind::Incremental)
    }
}

impl fmt::Display for DriftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sudden" => Ok(DriftKind::Sudden),
            "gradual" => Ok(DriftKind::Gradual),
            "incremental" => Ok(DriftKind::Incremental),
            "normal" => Ok(DriftKind::Normal),
            _ => Err(Error::Unknown {
                what: "drift kind",
                name: s.to_string(),
            }),
        }
    }
}

/// One injected drift: where it starts, how long the transition lasts and how
/// far the concept moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub position: usize,
    pub width: usize,
    pub magnitude: f64,
}

impl DriftSpec {
    pub fn normal() -> Self {
        Self {
            kind: DriftKind::Normal,
            position: 0,
            width: 0,
            magnitude: 0.0,
        }
    }

    pub fn sudden(position: usize, magnitude: f64) -> Self {
        Self {
            kind: DriftKind::Sudden,
            position,
            width: 0,
            magnitude,
        }
    }

    pub fn gradual(position: usize, width: usize, magnitude: f64) -> Self {
        Self {
            kind: DriftKind::Gradual,
            position,
            width,
            magnitude,
        }
    }

    pub fn incremental(position: usize, width: usize, magnitude: f64) -> Self {
        Self {
            kind: DriftKind::Incremental,
            position,
            width,
            magnitude,
        }
    }

    /// Checks the invariants against a stream of `length` instances.
    pub fn validate(&self, length: usize) -> Result<()> {
        if self.position + self.width > length {
            return Err(Error::InvalidConfig(format!(
                "drift at {} with width {} does not fit in a stream of length {length}",
                self.position, self.width
            )));
        }
        if self.kind.has_width() != (self.width > 0) {
            return Err(Error::InvalidConfig(format!(
                "{} drift cannot have width {}",
                self.kind, self.width
            )));
        }
        if !(0.0..=1.0).contains(&self.magnitude) {
            return Err(Error::InvalidConfig(format!(
                "magnitude {} outside [0, 1]",
                self.magnitude
            )));
        }
        if self.kind == DriftKind::Normal && self.magnitude != 0.0 {
            return Err(Error::InvalidConfig(
                "normal drift must have magnitude 0".into(),
            ));
        }
        Ok(())
    }

    /// First index after the transition region.
    pub fn end(&self) -> usize {
        self.position + self.width
    }
}

/// A labelled instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: u32,
}

/// Stream generator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Sea,
    Hyp,
    Agr,
    Rbf,
    Rtg,
    ErrorTrace,
}

impl GeneratorKind {
    pub const FEATURE_STREAMS: [GeneratorKind; 5] = [
        GeneratorKind::Sea,
        GeneratorKind::Hyp,
        GeneratorKind::Agr,
        GeneratorKind::Rbf,
        GeneratorKind::Rtg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Sea => "sea",
            GeneratorKind::Hyp => "hyp",
            GeneratorKind::Agr => "agr",
            GeneratorKind::Rbf => "rbf",
            GeneratorKind::Rtg => "rtg",
            GeneratorKind::ErrorTrace => "error-trace",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sea" => Ok(GeneratorKind::Sea),
            "hyp" | "hyperplane" => Ok(GeneratorKind::Hyp),
            "agr" | "agrawal" => Ok(GeneratorKind::Agr),
            "rbf" => Ok(GeneratorKind::Rbf),
            "rtg" | "random-tree" => Ok(GeneratorKind::Rtg),
            "error-trace" | "trace" => Ok(GeneratorKind::ErrorTrace),
            _ => Err(Error::Unknown {
                what: "generator",
                name: s.to_string(),
            }),
        }
    }
}

/// Configuration of a single-drift stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub generator: GeneratorKind,
    pub length: usize,
    pub drift: DriftSpec,
    pub seed: u64,
    /// Label-flip probability for feature streams.
    pub noise: f64,
    /// Error rates, used only by the `error-trace` generator.
    #[serde(default)]
    pub trace: TraceParams,
}

impl StreamConfig {
    pub fn new(generator: GeneratorKind, length: usize, drift: DriftSpec, seed: u64) -> Self {
        Self {
            generator,
            length,
            drift,
            seed,
            noise: 0.0,
            trace: TraceParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidConfig("stream length must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidConfig(format!(
                "noise {} outside [0, 1]",
                self.noise
            )));
        }
        self.drift.validate(self.length)
    }
}

/// Generates a labelled feature stream with a single drift.
pub fn generate_stream(cfg: &StreamConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let drifts: &[DriftSpec] = if cfg.drift.kind == DriftKind::Normal {
        &[]
    } else {
        std::slice::from_ref(&cfg.drift)
    };
    generate_stream_with_drifts(cfg.generator, cfg.length, drifts, cfg.seed, cfg.noise)
}

/// Generates a labelled feature stream whose concept moves at every drift in
/// `drifts` (sorted by position, non-overlapping).
pub fn generate_stream_with_drifts(
    generator: GeneratorKind,
    length: usize,
    drifts: &[DriftSpec],
    seed: u64,
    noise: f64,
) -> Result<Vec<Sample>> {
    if length == 0 {
        return Err(Error::InvalidConfig("stream length must be >= 1".into()));
    }
    let mut stream = ConceptStream::new(generator, drifts, length, seed, noise)?;
    Ok((0..length).map(|_| stream.next_sample()).collect())
}

/// Generates the error trace described by an `error-trace` stream config.
pub fn generate_error_trace(cfg: &StreamConfig) -> Result<crate::trace::ErrorTrace> {
    if cfg.generator != GeneratorKind::ErrorTrace {
        return Err(Error::InvalidConfig(format!(
            "generator {} produces samples, not an error trace",
            cfg.generator
        )));
    }
    cfg.validate()?;
    simulate_error_trace(
        cfg.drift.kind,
        cfg.length,
        &cfg.trace,
        cfg.drift.width,
        cfg.drift.position,
        cfg.seed,
    )
}

/// Evenly spaced drift positions: `count` drifts splitting `length` into
/// `count + 1` equal segments.
pub fn evenly_spaced_positions(length: usize, count: usize) -> Vec<usize> {
    (1..=count).map(|i| i * length / (count + 1)).collect()
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
