//! Classical streaming drift detectors behind one interface.
//!
//! Every detector consumes one element of an error stream at a time and
//! reports `in_control`, `warning` or `drift`. After a drift the detector
//! starts a fresh concept (ADWIN does so by dropping the pre-cut part of its
//! window). Defaults follow the reference values each method is usually run
//! with; see the config structs for the exact numbers.

mod adwin;
mod ddm;
mod eddm;
mod hddm_a;
mod hddm_w;
mod kswin;
mod page_hinkley;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adwin::{Adwin, AdwinConfig};
pub use ddm::{Ddm, DdmConfig};
pub use eddm::{Eddm, EddmConfig};
pub use hddm_a::{HddmA, HddmAConfig};
pub use hddm_w::{HddmW, HddmWConfig};
pub use kswin::{ks_two_sample_pvalue, Kswin, KswinConfig};
pub use page_hinkley::{PageHinkley, PageHinkleyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorState {
    InControl,
    Warning,
    Drift,
}

impl DetectorState {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorState::InControl => "in_control",
            DetectorState::Warning => "warning",
            DetectorState::Drift => "drift",
        }
    }
}

impl fmt::Display for DetectorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Detector output for the element at timestamp `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorStatus {
    pub state: DetectorState,
    pub at: usize,
}

/// Algorithm-level interface implemented by each detector.
pub trait ChangeDetector: Send {
    /// Feeds one element that has already passed domain validation.
    fn add(&mut self, value: f64) -> DetectorState;
    fn reset(&mut self);
    /// Whether `value` is in the accepted input domain.
    fn accepts(&self, value: f64) -> bool;
    fn config(&self) -> DetectorConfig;
}

/// The seven baseline detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "ADWIN")]
    Adwin,
    #[serde(rename = "DDM")]
    Ddm,
    #[serde(rename = "EDDM")]
    Eddm,
    #[serde(rename = "HDDM-A")]
    HddmA,
    #[serde(rename = "HDDM-W")]
    HddmW,
    #[serde(rename = "Page-Hinkley")]
    PageHinkley,
    #[serde(rename = "KSWIN")]
    Kswin,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::Adwin,
        DetectorKind::Ddm,
        DetectorKind::Eddm,
        DetectorKind::HddmA,
        DetectorKind::HddmW,
        DetectorKind::PageHinkley,
        DetectorKind::Kswin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Adwin => "ADWIN",
            DetectorKind::Ddm => "DDM",
            DetectorKind::Eddm => "EDDM",
            DetectorKind::HddmA => "HDDM-A",
            DetectorKind::HddmW => "HDDM-W",
            DetectorKind::PageHinkley => "Page-Hinkley",
            DetectorKind::Kswin => "KSWIN",
        }
    }

    pub fn default_config(self) -> DetectorConfig {
        match self {
            DetectorKind::Adwin => DetectorConfig::Adwin(AdwinConfig::default()),
            DetectorKind::Ddm => DetectorConfig::Ddm(DdmConfig::default()),
            DetectorKind::Eddm => DetectorConfig::Eddm(EddmConfig::default()),
            DetectorKind::HddmA => DetectorConfig::HddmA(HddmAConfig::default()),
            DetectorKind::HddmW => DetectorConfig::HddmW(HddmWConfig::default()),
            DetectorKind::PageHinkley => DetectorConfig::PageHinkley(PageHinkleyConfig::default()),
            DetectorKind::Kswin => DetectorConfig::Kswin(KswinConfig::default()),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "adwin" => DetectorKind::Adwin,
            "ddm" => DetectorKind::Ddm,
            "eddm" => DetectorKind::Eddm,
            "hddma" => DetectorKind::HddmA,
            "hddmw" => DetectorKind::HddmW,
            "pagehinkley" | "ph" => DetectorKind::PageHinkley,
            "kswin" => DetectorKind::Kswin,
            _ => {
                return Err(Error::Unknown {
                    what: "detector",
                    name: s.to_string(),
                })
            }
        })
    }
}

/// Per-detector thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "detector", rename_all = "kebab-case")]
pub enum DetectorConfig {
    Adwin(AdwinConfig),
    Ddm(DdmConfig),
    Eddm(EddmConfig),
    HddmA(HddmAConfig),
    HddmW(HddmWConfig),
    PageHinkley(PageHinkleyConfig),
    Kswin(KswinConfig),
}

impl DetectorConfig {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorConfig::Adwin(_) => DetectorKind::Adwin,
            DetectorConfig::Ddm(_) => DetectorKind::Ddm,
            DetectorConfig::Eddm(_) => DetectorKind::Eddm,
            DetectorConfig::HddmA(_) => DetectorKind::HddmA,
            DetectorConfig::HddmW(_) => DetectorKind::HddmW,
            DetectorConfig::PageHinkley(_) => DetectorKind::PageHinkley,
            DetectorConfig::Kswin(_) => DetectorKind::Kswin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{}: {msg}", self.kind())));
        match self {
            DetectorConfig::Adwin(c) => {
                if !(c.delta > 0.0 && c.delta < 1.0) {
                    return bad("delta must be in (0, 1)");
                }
                if c.clock == 0 || c.max_buckets < 2 || c.min_window_length == 0 {
                    return bad("clock, max_buckets and min_window_length must be positive");
                }
            }
            DetectorConfig::Ddm(c) => {
                if !(c.warning_level > 0.0 && c.warning_level < c.drift_level) {
                    return bad("need 0 < warning_level < drift_level");
                }
            }
            DetectorConfig::Eddm(c) => {
                // EDDM alarms when a ratio falls *below* the level, so the
                // drift level is the smaller one.
                if !(c.drift_level > 0.0 && c.drift_level < c.warning_level && c.warning_level < 1.0)
                {
                    return bad("need 0 < drift_level < warning_level < 1");
                }
            }
            DetectorConfig::HddmA(HddmAConfig {
                drift_confidence,
                warning_confidence,
                ..
            })
            | DetectorConfig::HddmW(HddmWConfig {
                drift_confidence,
                warning_confidence,
                ..
            }) => {
                // Smaller confidence value means a stricter test.
                if !(*drift_confidence > 0.0 && drift_confidence < warning_confidence && *warning_confidence < 1.0)
                {
                    return bad("need 0 < drift_confidence < warning_confidence < 1");
                }
                if let DetectorConfig::HddmW(c) = self {
                    if !(c.lambda > 0.0 && c.lambda <= 1.0) {
                        return bad("lambda must be in (0, 1]");
                    }
                }
            }
            DetectorConfig::PageHinkley(c) => {
                if !(c.threshold > 0.0 && c.delta >= 0.0 && c.alpha > 0.0 && c.alpha <= 1.0) {
                    return bad("need threshold > 0, delta >= 0, alpha in (0, 1]");
                }
            }
            DetectorConfig::Kswin(c) => {
                if !(c.alpha > 0.0 && c.alpha < 1.0) {
                    return bad("alpha must be in (0, 1)");
                }
                if c.stat_size == 0 || c.window_size < 2 * c.stat_size {
                    return bad("window_size must be at least twice stat_size");
                }
            }
        }
        Ok(())
    }
}

/// A detector instance with its own element clock.
pub struct Detector {
    kind: DetectorKind,
    inner: Box<dyn ChangeDetector>,
    t: usize,
}

impl fmt::Debug for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Detector")
            .field("kind", &self.kind)
            .field("t", &self.t)
            .finish()
    }
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let kind = config.kind();
        let inner: Box<dyn ChangeDetector> = match config {
            DetectorConfig::Adwin(c) => Box::new(Adwin::new(c)),
            DetectorConfig::Ddm(c) => Box::new(Ddm::new(c)),
            DetectorConfig::Eddm(c) => Box::new(Eddm::new(c)),
            DetectorConfig::HddmA(c) => Box::new(HddmA::new(c)),
            DetectorConfig::HddmW(c) => Box::new(HddmW::new(c)),
            DetectorConfig::PageHinkley(c) => Box::new(PageHinkley::new(c)),
            DetectorConfig::Kswin(c) => Box::new(Kswin::new(c)),
        };
        Ok(Self { kind, inner, t: 0 })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn config(&self) -> DetectorConfig {
        self.inner.config()
    }

    /// Feeds one element of the error stream.
    pub fn update(&mut self, value: f64) -> Result<DetectorStatus> {
        if !self.inner.accepts(value) {
            return Err(Error::OutOfDomain(format!(
                "{} does not accept input {value}",
                self.kind
            )));
        }
        let state = self.inner.add(value);
        let at = self.t;
        self.t += 1;
        Ok(DetectorStatus { state, at })
    }

    pub fn reset(&mut self) {
        self.inner.reset();
    }
}

/// Builds a detector by name, with advised defaults when `config` is `None`.
pub fn make_detector(name: &str, config: Option<DetectorConfig>) -> Result<Detector> {
    let kind: DetectorKind = name.parse()?;
    let config = config.unwrap_or_else(|| kind.default_config());
    if config.kind() != kind {
        return Err(Error::InvalidConfig(format!(
            "config for {} given to {kind}",
            config.kind()
        )));
    }
    Detector::new(config)
}

/// One row of an alarm log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmRecord {
    pub timestamp: usize,
    pub detector: String,
    pub state: DetectorState,
}

/// Writes `timestamp,detector,state` rows.
pub fn write_alarm_log<W: Write>(out: W, records: &[AlarmRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["timestamp", "detector", "state"])?;
    for r in records {
        writer.write_record([r.timestamp.to_string(), r.detector.clone(), r.state.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Runs `detector` over a whole trace and returns every non-`in_control`
/// status.
pub fn scan(detector: &mut Detector, values: impl IntoIterator<Item = f64>) -> Result<Vec<DetectorStatus>> {
    let mut out = Vec::new();
    for v in values {
        let status = detector.update(v)?;
        if status.state != DetectorState::InControl {
            out.push(status);
        }
    }
    Ok(out)
}

fn is_binary(value: f64) -> bool {
    value == 0.0 || value == 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for kind in DetectorKind::ALL {
            assert_eq!(kind.as_str().parse::<DetectorKind>().unwrap(), kind);
            let d = make_detector(kind.as_str(), None).unwrap();
            assert_eq!(d.kind(), kind);
            assert_eq!(d.config(), kind.default_config());
        }
        assert!(make_detector("XYZ", None).is_err());
    }

    #[test]
    fn ddm_starts_in_control() {
        let mut d = make_detector("DDM", None).unwrap();
        assert_eq!(
            d.update(0.0).unwrap(),
            DetectorStatus {
                state: DetectorState::InControl,
                at: 0
            }
        );
    }

    #[test]
    fn adwin_echoes_delta() {
        let cfg = DetectorConfig::Adwin(AdwinConfig {
            delta: 0.002,
            ..AdwinConfig::default()
        });
        let d = make_detector("ADWIN", Some(cfg.clone())).unwrap();
        assert_eq!(d.config(), cfg);
        let DetectorConfig::Adwin(c) = d.config() else {
            unreachable!()
        };
        assert_eq!(c.delta, 0.002);
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let cfg = DetectorKind::Ddm.default_config();
        assert!(make_detector("ADWIN", Some(cfg)).is_err());
    }

    #[test]
    fn invalid_thresholds_are_rejected() {
        let cfg = DetectorConfig::Ddm(DdmConfig {
            warning_level: 3.0,
            drift_level: 2.0,
            ..DdmConfig::default()
        });
        assert!(Detector::new(cfg).is_err());
        let cfg = DetectorConfig::Adwin(AdwinConfig {
            delta: 0.0,
            ..AdwinConfig::default()
        });
        assert!(Detector::new(cfg).is_err());
    }

    #[test]
    fn binary_detectors_reject_real_input() {
        for name in ["DDM", "EDDM", "HDDM-W", "HDDM-A"] {
            let mut d = make_detector(name, None).unwrap();
            assert!(d.update(0.5).is_err() || name.starts_with("HDDM"), "{name}");
            assert!(d.update(2.0).is_err(), "{name}");
        }
        let mut ph = make_detector("Page-Hinkley", None).unwrap();
        assert!(ph.update(0.5).is_ok());
        assert!(ph.update(f64::NAN).is_err());
    }

    #[test]
    fn alarm_log_format() {
        let mut buf = Vec::new();
        let rows = [AlarmRecord {
            timestamp: 12,
            detector: "DDM".into(),
            state: DetectorState::Warning,
        }];
        write_alarm_log(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "timestamp,detector,state\n12,DDM,warning\n");
    }
}
