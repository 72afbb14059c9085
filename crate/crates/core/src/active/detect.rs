use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::queue::{LabelQuery, PredictionSummary, QueryQueue};
use super::{apply_label, raw_entropy, should_query, ActiveConfig, Oracle};
use crate::baselearner::{Adaptation, ResetHook};
use crate::error::Result;
use crate::metafeat::{MetaSample, StreamingView};
use crate::protonet::MetaDetector;
use crate::streamgen::DriftKind;

/// A non-normal prediction at one emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    /// Index of the trace element that completed the emission.
    pub timestamp: usize,
    #[serde(rename = "type")]
    pub kind: DriftKind,
    pub entropy: f64,
    pub emission: usize,
    /// False when the alarm continues the previous drift event.
    pub new_event: bool,
}

/// Outcome of a detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRun {
    pub alarms: Vec<Alarm>,
    pub queries: Vec<LabelQuery>,
    pub detector: MetaDetector,
    pub emissions: usize,
    pub labels_applied: usize,
}

impl DetectionRun {
    /// Alarms that start a drift event.
    pub fn events(&self) -> impl Iterator<Item = &Alarm> {
        self.alarms.iter().filter(|a| a.new_event)
    }
}

/// The Meta-ADD loop over an error stream, one element at a time.
///
/// Without an oracle no query is ever issued and the detector stays frozen
/// (Meta-DD).
pub struct ActiveDetector {
    detector: MetaDetector,
    view: StreamingView,
    cfg: ActiveConfig,
    oracle: Option<Box<dyn Oracle>>,
    queue: QueryQueue,
    t: usize,
    skip: usize,
    emissions: usize,
    spent: usize,
    alarms: Vec<Alarm>,
    last_alarm: Option<(DriftKind, usize)>,
    labels_applied: usize,
}

impl std::fmt::Debug for ActiveDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ActiveDetector")
            .field("t", &self.t)
            .field("emissions", &self.emissions)
            .field("alarms", &self.alarms.len())
            .field("querying", &self.oracle.is_some())
            .finish()
    }
}

impl ActiveDetector {
    pub fn new(detector: MetaDetector, cfg: ActiveConfig, oracle: Option<Box<dyn Oracle>>) -> Result<Self> {
        let budget = if oracle.is_some() { cfg.label_budget } else { Some(0) };
        Self::with_queue(detector, cfg, oracle, QueryQueue::new(budget))
    }

    /// Uses an existing queue, e.g. one already shared with the label service.
    pub fn with_queue(
        detector: MetaDetector,
        cfg: ActiveConfig,
        oracle: Option<Box<dyn Oracle>>,
        queue: QueryQueue,
    ) -> Result<Self> {
        detector.validate()?;
        cfg.validate()?;
        let view = StreamingView::new(detector.window, "stream")?;
        let skip = cfg.warmup;
        Ok(Self {
            detector,
            view,
            cfg,
            oracle,
            queue,
            t: 0,
            skip,
            emissions: 0,
            spent: 0,
            alarms: Vec::new(),
            last_alarm: None,
            labels_applied: 0,
        })
    }

    pub fn queue(&self) -> QueryQueue {
        self.queue.clone()
    }

    pub fn detector(&self) -> &MetaDetector {
        &self.detector
    }

    pub fn alarms(&self) -> &[Alarm] {
        &self.alarms
    }

    /// Feeds one error; returns the alarm raised at this element, if any.
    pub fn observe(&mut self, error: u8) -> Result<Option<Alarm>> {
        let t = self.t;
        self.t += 1;
        let position = self.t;
        self.queue.update_status(|s| s.position = position);
        if self.skip > 0 {
            self.skip -= 1;
            return Ok(None);
        }
        match self.view.push(error) {
            Some(mut sample) => {
                sample.source.offset = position;
                self.on_emission(t, sample)
            }
            None => Ok(None),
        }
    }

    /// The monitored learner was replaced: older windows describe a model
    /// that no longer exists.
    pub fn learner_reset(&mut self) {
        self.view.clear();
        self.skip = self.cfg.warmup;
        self.last_alarm = None;
    }

    fn apply_answers(&mut self) {
        for q in self.queue.take_answered() {
            let Some(class) = q.label else { continue };
            match apply_label(&mut self.detector, &q.meta_sample, class, &self.cfg) {
                Ok(()) => self.labels_applied += 1,
                Err(e) => log::warn!("label for query {} not applied: {e}", q.id),
            }
        }
    }

    fn on_emission(&mut self, t: usize, sample: MetaSample) -> Result<Option<Alarm>> {
        let emission = self.emissions;
        self.emissions += 1;
        self.apply_answers();
        self.queue.expire(emission, self.cfg.query_expiry);

        let pred = self.detector.predict(&sample.gaps)?;
        let entropy = raw_entropy(&pred.probabilities);
        let mut alarm = None;
        if self.cfg.alarm_classes.contains(&pred.class) {
            let coalesce = self.detector.window.l + 1;
            let new_event = !matches!(self.last_alarm, Some((k, e)) if k == pred.class && emission - e <= coalesce);
            self.last_alarm = Some((pred.class, emission));
            let a = Alarm {
                timestamp: t,
                kind: pred.class,
                entropy,
                emission,
                new_event,
            };
            self.alarms.push(a.clone());
            alarm = Some(a);
        }

        let means = self.view.means();
        if self.oracle.is_some() && should_query(&pred.probabilities, &self.cfg, self.spent) {
            self.spent += 1;
            let id = self
                .queue
                .enqueue(sample, means.clone(), pred.probabilities.clone(), entropy, t, emission);
            let query = self.queue.get(id).expect("query was just enqueued");
            if let Some(oracle) = self.oracle.as_mut() {
                match oracle.ask(&query) {
                    Ok(Some(class)) => {
                        if let Err(e) = self.queue.answer(id, class) {
                            log::warn!("oracle answer to query {id} rejected: {e}");
                        }
                    }
                    Ok(None) => {}
                    Err(e) => log::warn!("oracle failed on query {id}: {e}"),
                }
            }
        }

        let alarms = self.alarms.len();
        let emissions = self.emissions;
        self.queue.update_status(|s| {
            s.emissions = emissions;
            s.alarms = alarms;
            s.window_means = means;
            s.last_prediction = Some(PredictionSummary {
                class: pred.class,
                probabilities: pred.probabilities,
                entropy,
            });
        });
        Ok(alarm)
    }

    /// Applies any answers still outstanding and returns the run.
    pub fn finish(mut self) -> DetectionRun {
        self.apply_answers();
        DetectionRun {
            alarms: self.alarms,
            queries: self.queue.list(None),
            detector: self.detector,
            emissions: self.emissions,
            labels_applied: self.labels_applied,
        }
    }
}

impl ResetHook for ActiveDetector {
    fn observe(&mut self, _t: usize, error: bool) -> Result<Adaptation> {
        match ActiveDetector::observe(self, u8::from(error))? {
            Some(a) if a.new_event => {
                self.learner_reset();
                Ok(Adaptation::Drift)
            }
            _ => Ok(Adaptation::Stable),
        }
    }
}

/// Runs the detection loop over a complete error trace.
pub fn run_active_detection(
    trace: &[u8],
    detector: MetaDetector,
    cfg: &ActiveConfig,
    oracle: Option<Box<dyn Oracle>>,
) -> Result<DetectionRun> {
    let mut active = ActiveDetector::new(detector, cfg.clone(), oracle)?;
    for &e in trace {
        active.observe(e)?;
    }
    Ok(active.finish())
}

/// One JSON object per line.
pub fn write_query_log<W: Write>(mut out: W, queries: &[LabelQuery]) -> Result<()> {
    for q in queries {
        serde_json::to_writer(&mut out, q)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_query_log<R: BufRead>(input: R) -> Result<Vec<LabelQuery>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Alarm log as `timestamp,type,entropy` rows.
pub fn write_event_log<W: Write>(out: W, alarms: &[Alarm]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["timestamp", "type", "entropy"])?;
    for a in alarms {
        writer.write_record([a.timestamp.to_string(), a.kind.to_string(), a.entropy.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
