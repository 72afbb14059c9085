//! The four desk-scale experiments.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{build_meta_corpus, CorpusConfig, TraceRanges};
use super::ingest::{ingest_real_dataset, Dataset};
use super::metrics::drift_f1;
use crate::active::{ActiveConfig, ActiveDetector, GroundTruthOracle, Oracle};
use crate::baselearner::{prequential_run, Adaptation, NoReset, PrequentialResult};
use crate::detectors::{Detector, DetectorKind, DetectorState};
use crate::error::{Error, Result};
use crate::metafeat::WindowSpec;
use crate::protonet::{evaluate, train_meta_detector, Architecture, MetaDetector, TrainConfig};
use crate::streamgen::{evenly_spaced_positions, generate_stream_with_drifts, DriftKind, DriftSpec, GeneratorKind, Sample, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [ExperimentId::Exp1, ExperimentId::Exp2, ExperimentId::Exp3, ExperimentId::Exp4];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4 => "exp4",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown {
                what: "experiment",
                name: s.into(),
            })
    }
}

/// How a meta-detector is trained inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaTraining {
    pub train_per_class: usize,
    pub ranges: TraceRanges,
    pub episodes: usize,
    pub patience: usize,
}

impl Default for MetaTraining {
    fn default() -> Self {
        Self {
            train_per_class: 200,
            ranges: TraceRanges::default(),
            episodes: 2000,
            patience: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Config {
    pub window: WindowSpec,
    pub training: MetaTraining,
    pub test_per_class: usize,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Self {
            window: WindowSpec {
                n: 25,
                l: 100,
                sign_agnostic: false,
            },
            training: MetaTraining::default(),
            test_per_class: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Config {
    pub ls: Vec<usize>,
    pub ns: Vec<usize>,
    pub training: MetaTraining,
    pub test_per_class: usize,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Self {
            ls: vec![50, 100, 200],
            ns: vec![1, 25, 50],
            training: MetaTraining::default(),
            test_per_class: 50,
        }
    }
}

/// Stream-level benchmark on the synthetic generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3Config {
    pub generators: Vec<GeneratorKind>,
    pub seeds: usize,
    pub length: usize,
    /// Drifts injected per stream, evenly spaced, cycling through sudden,
    /// gradual and incremental.
    pub drifts: usize,
    /// Transition width of the gradual and incremental drifts.
    pub drift_width: usize,
    pub noise: f64,
    pub window: WindowSpec,
    pub training: MetaTraining,
    pub active: ActiveConfig,
    /// F1 matching tolerance; defaults to `2·n·(L + 1)`.
    pub tolerance: Option<usize>,
}

impl Default for Exp3Config {
    fn default() -> Self {
        Self {
            generators: GeneratorKind::FEATURE_STREAMS.to_vec(),
            seeds: 5,
            length: 10_000,
            drifts: 3,
            drift_width: 500,
            noise: 0.1,
            window: WindowSpec {
                n: 50,
                l: 20,
                sign_agnostic: false,
            },
            training: MetaTraining {
                ranges: TraceRanges {
                    base_error: (0.05, 0.3),
                    severity: (0.15, 0.4),
                    ..TraceRanges::default()
                },
                ..MetaTraining::default()
            },
            active: ActiveConfig::default(),
            tolerance: None,
        }
    }
}

impl Exp3Config {
    pub fn tolerance(&self) -> usize {
        self.tolerance.unwrap_or(2 * self.window.extent())
    }

    /// The injected drift schedule.
    pub fn schedule(&self) -> Vec<DriftSpec> {
        evenly_spaced_positions(self.length, self.drifts)
            .into_iter()
            .enumerate()
            .map(|(i, p)| match i % 3 {
                0 => DriftSpec::sudden(p, 1.0),
                1 => DriftSpec::gradual(p, self.drift_width, 1.0),
                _ => DriftSpec::incremental(p, self.drift_width, 1.0),
            })
            .collect()
    }
}

/// Detector bank on real-world (or stand-in) streams across window sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp4Config {
    pub datasets: Vec<PathBuf>,
    pub l: usize,
    pub ns: Vec<usize>,
    pub training: MetaTraining,
    pub active: ActiveConfig,
}

impl Default for Exp4Config {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            l: 50,
            ns: vec![1, 25],
            training: Exp3Config::default().training,
            active: ActiveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub exp1: Exp1Config,
    pub exp2: Exp2Config,
    pub exp3: Exp3Config,
    pub exp4: Exp4Config,
}

/// Held-out accuracy of one trained meta-detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaAccuracy {
    pub label: String,
    pub per_class: Vec<f64>,
    pub macro_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub l: usize,
    pub n: usize,
    pub accuracy: f64,
    pub macro_accuracy: f64,
}

/// One method on one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub stream: String,
    pub seed: u64,
    pub method: String,
    pub accuracy: f64,
    /// `None` when the stream has no known drifts or the method never detects.
    pub f1: Option<f64>,
    /// Drift events that reset the learner.
    pub dn: usize,
    pub detections: Vec<usize>,
    pub queries: usize,
}

/// Mean over seeds of one method on one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub stream: String,
    pub method: String,
    pub accuracy: f64,
    pub f1: Option<f64>,
    pub dn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub meta_accuracy: Vec<MetaAccuracy>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub grid: Vec<GridCell>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub runs: Vec<MethodRun>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub summary: Vec<MethodSummary>,
}

/// Seeds for independent parts of an experiment (splitmix64 finalizer).
pub fn sub_seed(seed: u64, part: u64) -> u64 {
    let mut z = seed ^ part.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_experiment(id: ExperimentId, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match id {
        ExperimentId::Exp1 => run_exp1(&cfg.exp1, cfg.seed),
        ExperimentId::Exp2 => run_exp2(&cfg.exp2, cfg.seed),
        ExperimentId::Exp3 => run_exp3(&cfg.exp3, cfg.seed),
        ExperimentId::Exp4 => run_exp4(&cfg.exp4, cfg.seed),
    }
}

fn empty_report(experiment: ExperimentId, seed: u64, config: serde_json::Value) -> ExperimentReport {
    ExperimentReport {
        experiment,
        seed,
        config,
        meta_accuracy: Vec::new(),
        grid: Vec::new(),
        runs: Vec::new(),
        summary: Vec::new(),
    }
}

/// Trains a meta-detector on a freshly simulated corpus.
pub fn train_on_corpus(
    window: WindowSpec,
    training: &MetaTraining,
    architecture: Architecture,
    seed: u64,
) -> Result<MetaDetector> {
    let corpus = build_meta_corpus(&CorpusConfig {
        per_class: training.train_per_class,
        window,
        ranges: training.ranges,
        seed: sub_seed(seed, 1),
    })?;
    let cfg = TrainConfig {
        architecture,
        episodes: training.episodes,
        patience: training.patience,
        seed: sub_seed(seed, 3),
        ..TrainConfig::default()
    };
    Ok(train_meta_detector(&corpus, window, &cfg)?.0)
}

fn held_out_accuracy(
    detector: &MetaDetector,
    training: &MetaTraining,
    test_per_class: usize,
    seed: u64,
) -> Result<crate::protonet::Evaluation> {
    let test = build_meta_corpus(&CorpusConfig {
        per_class: test_per_class,
        window: detector.window,
        ranges: training.ranges,
        seed: sub_seed(seed, 2),
    })?;
    evaluate(&detector.net, &detector.prototypes, &test)
}

fn run_exp1(cfg: &Exp1Config, seed: u64) -> Result<ExperimentReport> {
    let archs = [Architecture::Fcn, Architecture::Rnn];
    let rows = archs
        .par_iter()
        .map(|&arch| {
            let det = train_on_corpus(cfg.window, &cfg.training, arch, seed)?;
            let eval = held_out_accuracy(&det, &cfg.training, cfg.test_per_class, seed)?;
            Ok(MetaAccuracy {
                label: arch.to_string(),
                per_class: eval.per_class_accuracy,
                macro_accuracy: eval.macro_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = empty_report(ExperimentId::Exp1, seed, serde_json::to_value(cfg)?);
    report.meta_accuracy = rows;
    Ok(report)
}

fn run_exp2(cfg: &Exp2Config, seed: u64) -> Result<ExperimentReport> {
    let cells: Vec<(usize, usize)> = cfg.ls.iter().flat_map(|&l| cfg.ns.iter().map(move |&n| (l, n))).collect();
    let grid = cells
        .par_iter()
        .map(|&(l, n)| {
            let window = WindowSpec::new(n, l)?;
            let det = train_on_corpus(window, &cfg.training, Architecture::Fcn, seed)?;
            let eval = held_out_accuracy(&det, &cfg.training, cfg.test_per_class, seed)?;
            Ok(GridCell {
                l,
                n,
                accuracy: eval.accuracy,
                macro_accuracy: eval.macro_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = empty_report(ExperimentId::Exp2, seed, serde_json::to_value(cfg)?);
    report.grid = grid;
    Ok(report)
}

/// A drift-handling strategy for the prequential learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NoDetector,
    Baseline(DetectorKind),
    MetaDd,
    MetaAdd,
}

impl Method {
    pub fn bank() -> Vec<Method> {
        let mut m = vec![Method::NoDetector];
        m.extend(DetectorKind::ALL.map(Method::Baseline));
        m.extend([Method::MetaDd, Method::MetaAdd]);
        m
    }

    pub fn name(self) -> String {
        match self {
            Method::NoDetector => "*".into(),
            Method::Baseline(k) => k.to_string(),
            Method::MetaDd => "Meta-DD".into(),
            Method::MetaAdd => "Meta-ADD".into(),
        }
    }
}

/// Outcome of one method on one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub result: PrequentialResult,
    pub queries: usize,
}

/// Runs the prequential learner under `method`. Meta-ADD needs the true
/// drift schedule for its oracle.
pub fn run_method(
    stream: &[Sample],
    method: Method,
    meta: Option<&MetaDetector>,
    active: &ActiveConfig,
    truth: Option<&[DriftSpec]>,
) -> Result<StreamRun> {
    match method {
        Method::NoDetector => Ok(StreamRun {
            result: prequential_run(stream, &mut NoReset)?,
            queries: 0,
        }),
        Method::Baseline(kind) => {
            let mut detector = Detector::new(kind.default_config())?;
            let mut hook = |_t: usize, error: bool| -> Result<Adaptation> {
                let status = detector.update(f64::from(u8::from(error)))?;
                Ok(match status.state {
                    DetectorState::Drift => {
                        detector.reset();
                        Adaptation::Drift
                    }
                    DetectorState::Warning => Adaptation::Warning,
                    DetectorState::InControl => Adaptation::Stable,
                })
            };
            Ok(StreamRun {
                result: prequential_run(stream, &mut hook)?,
                queries: 0,
            })
        }
        Method::MetaDd | Method::MetaAdd => {
            let meta = meta.ok_or(Error::EmptyModel("meta-detector methods need a trained detector"))?;
            let oracle: Option<Box<dyn Oracle>> = match method {
                Method::MetaAdd => {
                    let truth = truth.ok_or_else(|| {
                        Error::InvalidConfig("Meta-ADD needs a ground-truth drift schedule".into())
                    })?;
                    Some(Box::new(GroundTruthOracle::new(truth)))
                }
                _ => None,
            };
            let mut hook = ActiveDetector::new(meta.clone(), active.clone(), oracle)?;
            let result = prequential_run(stream, &mut hook)?;
            let queries = hook.queue().len();
            Ok(StreamRun { result, queries })
        }
    }
}

fn method_run(
    stream: &str,
    seed: u64,
    method: Method,
    run: StreamRun,
    truth: Option<&[DriftSpec]>,
    tolerance: usize,
) -> MethodRun {
    let detections = run.result.resets;
    let f1 = match (method, truth) {
        (Method::NoDetector, _) | (_, None) => None,
        (_, Some(t)) => {
            let onsets: Vec<usize> = t.iter().map(|d| d.position).collect();
            Some(drift_f1(&onsets, &detections, tolerance).f1)
        }
    };
    MethodRun {
        stream: stream.to_string(),
        seed,
        method: method.name(),
        accuracy: run.result.accuracy,
        f1,
        dn: detections.len(),
        detections,
        queries: run.queries,
    }
}

fn summarize(runs: &[MethodRun]) -> Vec<MethodSummary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in runs {
        let k = (r.stream.clone(), r.method.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(stream, method)| {
            let rs: Vec<&MethodRun> = runs.iter().filter(|r| r.stream == stream && r.method == method).collect();
            let n = rs.len() as f64;
            let f1 = if rs.iter().all(|r| r.f1.is_some()) {
                Some(rs.iter().filter_map(|r| r.f1).sum::<f64>() / n)
            } else {
                None
            };
            MethodSummary {
                accuracy: rs.iter().map(|r| r.accuracy).sum::<f64>() / n,
                f1,
                dn: rs.iter().map(|r| r.dn as f64).sum::<f64>() / n,
                stream,
                method,
            }
        })
        .collect()
}

fn run_exp3(cfg: &Exp3Config, seed: u64) -> Result<ExperimentReport> {
    cfg.window.validate()?;
    let meta = train_on_corpus(cfg.window, &cfg.training, Architecture::Fcn, seed)?;
    let schedule = cfg.schedule();
    let tolerance = cfg.tolerance();
    let streams: Vec<(GeneratorKind, u64)> = cfg
        .generators
        .iter()
        .flat_map(|&g| (0..cfg.seeds as u64).map(move |s| (g, s)))
        .collect();
    let runs = streams
        .par_iter()
        .map(|&(generator, s)| {
            let stream_seed = sub_seed(seed, 100 + s);
            let stream = generate_stream_with_drifts(generator, cfg.length, &schedule, stream_seed, cfg.noise)?;
            Method::bank()
                .into_par_iter()
                .map(|m| {
                    let run = run_method(&stream, m, Some(&meta), &cfg.active, Some(&schedule))?;
                    Ok(method_run(generator.as_str(), s, m, run, Some(&schedule), tolerance))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let mut report = empty_report(ExperimentId::Exp3, seed, serde_json::to_value(cfg)?);
    report.summary = summarize(&runs);
    report.runs = runs;
    Ok(report)
}

fn run_exp4(cfg: &Exp4Config, seed: u64) -> Result<ExperimentReport> {
    if cfg.datasets.is_empty() {
        return Err(Error::InvalidConfig("exp4 needs at least one dataset file".into()));
    }
    let datasets = cfg
        .datasets
        .iter()
        .map(|p| {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("dataset {} not found", p.display())));
            }
            ingest_real_dataset(p, None)
        })
        .collect::<Result<Vec<Dataset>>>()?;
    let detectors = cfg
        .ns
        .par_iter()
        .map(|&n| train_on_corpus(WindowSpec::new(n, cfg.l)?, &cfg.training, Architecture::Fcn, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut cells: Vec<(usize, Method, Option<usize>)> = Vec::new();
    for (d, data) in datasets.iter().enumerate() {
        cells.push((d, Method::NoDetector, None));
        cells.extend(DetectorKind::ALL.map(|k| (d, Method::Baseline(k), None)));
        for i in 0..cfg.ns.len() {
            cells.push((d, Method::MetaDd, Some(i)));
            if data.drifts.is_some() {
                cells.push((d, Method::MetaAdd, Some(i)));
            }
        }
    }
    let runs = cells
        .par_iter()
        .map(|&(d, method, det)| {
            let data = &datasets[d];
            let truth = data.drifts.as_deref();
            let meta = det.map(|i| &detectors[i]);
            let run = run_method(&data.samples, method, meta, &cfg.active, truth)?;
            let tolerance = meta.map_or(0, |m| 2 * m.window.extent());
            let mut row = method_run(&data.name, 0, method, run, truth, tolerance);
            if let Some(m) = meta {
                row.method = format!("{} (n={})", row.method, m.window.n);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = empty_report(ExperimentId::Exp4, seed, serde_json::to_value(cfg)?);
    report.summary = summarize(&runs);
    report.runs = runs;
    Ok(report)
}

/// Synthetic stand-in for the electricity-pricing stream: a long binary
/// stream with a drift of random type every 1500 to 4000 samples.
pub fn elec_like_stream(length: usize, seed: u64) -> Result<(Vec<Sample>, Vec<DriftSpec>)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut drifts = Vec::new();
    let mut t = rng.random_range(1500..4000);
    while t + 600 < length {
        let kind = DriftKind::ALL[rng.random_range(0..NUM_CLASSES - 1)];
        let width = if kind.has_width() { rng.random_range(200..600) } else { 0 };
        drifts.push(DriftSpec {
            kind,
            position: t,
            width,
            magnitude: 1.0,
        });
        t += width + rng.random_range(1500..4000);
    }
    let samples = generate_stream_with_drifts(GeneratorKind::Hyp, length, &drifts, sub_seed(seed, 7), 0.1)?;
    Ok((samples, drifts))
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl ExperimentReport {
    /// Aligned-column text rendering.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        match self.experiment {
            ExperimentId::Exp1 => {
                let mut rows = vec![vec!["Structure".to_string()]];
                rows[0].extend(DriftKind::ALL.iter().map(|k| k.to_string()));
                rows[0].push("macro".into());
                for r in &self.meta_accuracy {
                    let mut row = vec![r.label.to_uppercase()];
                    row.extend(r.per_class.iter().map(|&a| pct(a)));
                    row.push(pct(r.macro_accuracy));
                    rows.push(row);
                }
                push_table(&mut out, &rows);
            }
            ExperimentId::Exp2 => {
                let mut ls: Vec<usize> = self.grid.iter().map(|c| c.l).collect();
                ls.dedup();
                let mut ns: Vec<usize> = self.grid.iter().map(|c| c.n).collect();
                ns.sort_unstable();
                ns.dedup();
                let mut rows = vec![vec!["l \\ n".to_string()]];
                rows[0].extend(ns.iter().map(|n| n.to_string()));
                for l in ls {
                    let mut row = vec![l.to_string()];
                    for &n in &ns {
                        let cell = self.grid.iter().find(|c| c.l == l && c.n == n);
                        row.push(cell.map_or("-".into(), |c| pct(c.accuracy)));
                    }
                    rows.push(row);
                }
                push_table(&mut out, &rows);
            }
            ExperimentId::Exp3 | ExperimentId::Exp4 => {
                let mut streams: Vec<&str> = Vec::new();
                let mut methods: Vec<&str> = Vec::new();
                for s in &self.summary {
                    if !streams.contains(&s.stream.as_str()) {
                        streams.push(&s.stream);
                    }
                    if !methods.contains(&s.method.as_str()) {
                        methods.push(&s.method);
                    }
                }
                let third = if self.experiment == ExperimentId::Exp3 { "F1" } else { "DN" };
                let mut rows = vec![vec!["Method".to_string()]];
                for s in &streams {
                    rows[0].push(format!("{s} Acc"));
                    rows[0].push(format!("{s} {third}"));
                }
                for m in &methods {
                    let mut row = vec![m.to_string()];
                    for s in &streams {
                        match self.summary.iter().find(|x| x.stream == *s && x.method == *m) {
                            Some(x) => {
                                row.push(pct(x.accuracy));
                                row.push(if self.experiment == ExperimentId::Exp3 {
                                    x.f1.map_or("Nan".into(), |f| format!("{f:.2}"))
                                } else {
                                    format!("{:.0}", x.dn)
                                });
                            }
                            None => row.extend(["-".to_string(), "-".to_string()]),
                        }
                    }
                    rows.push(row);
                }
                push_table(&mut out, &rows);
            }
        }
        out
    }
}

fn push_table(out: &mut String, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
}
