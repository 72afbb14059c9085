use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use label_service::ServerHandle;
use metadrift::active::{
    write_event_log, write_query_log, ActiveConfig, ActiveDetector, GroundTruthOracle, Oracle, ServiceOracle,
};
use metadrift::baselearner::prequential_run;
use metadrift::evalharness::{
    build_meta_corpus, elec_like_stream, run_experiment, CorpusConfig, ExperimentConfig, ExperimentId,
};
use metadrift::metafeat::{read_meta_corpus, write_meta_corpus, WindowSpec};
use metadrift::protonet::{train_meta_detector, EpisodeSpec, MetaDetector, TrainConfig, TrainReport};
use metadrift::streamgen::{
    read_stream_csv, simulate_error_trace, write_stream_csv, DriftKind, DriftSpec, GeneratorKind, Sample,
    TraceParams,
};
use metadrift::trace::{read_trace, write_trace};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{BenchArgs, DetectArgs, GenArgs, GenKind, OracleKind, TrainArgs};
use crate::manifest::ManifestBuilder;

/// Paths touched by a command, for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

pub fn finish(manifest: ManifestBuilder, out_dir: &Path, outcome: Outcome) -> Result<()> {
    let m = manifest.finish(outcome.config, outcome.seed, outcome.inputs, outcome.outputs);
    let path = m.write(out_dir)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

// ---------------------------------------------------------------- gen

/// Toy-stream drift schedule: evenly spaced, cycling sudden, gradual and
/// incremental.
fn toy_schedule(args: &GenArgs) -> Vec<DriftSpec> {
    metadrift::evalharness::Exp3Config {
        length: args.length,
        drifts: args.drifts,
        drift_width: args.drift_width,
        ..Default::default()
    }
    .schedule()
}

pub fn gen(args: &GenArgs, out: &Path) -> Result<Outcome> {
    let mut outcome = Outcome {
        config: to_value(args)?,
        seed: Some(args.seed),
        ..Outcome::default()
    };
    let path = match args.kind {
        GenKind::MetaCorpus => {
            let (Some(l), Some(n)) = (args.l, args.n) else {
                bail!("--l and --n are required for a meta-corpus");
            };
            let mut cfg = CorpusConfig::new(args.per_class, WindowSpec::new(n, l)?, args.seed);
            if let Some(r) = args.base_error {
                cfg.ranges.base_error = (r.0, r.1);
            }
            if let Some(r) = args.severity {
                cfg.ranges.severity = (r.0, r.1);
            }
            let corpus = build_meta_corpus(&cfg)?;
            let path = args.output.clone().unwrap_or_else(|| out.join("corpus.csv"));
            let mut w = create(&path)?;
            write_meta_corpus(&mut w, &corpus)?;
            w.flush()?;
            outcome.config["window"] = to_value(&cfg.window)?;
            outcome.config["ranges"] = to_value(&cfg.ranges)?;
            log::info!("{} meta-samples written", corpus.len());
            path
        }
        GenKind::Toy => {
            if args.generator == GeneratorKind::ErrorTrace {
                bail!("use --kind trace for error traces");
            }
            let drifts = toy_schedule(args);
            let samples = metadrift::streamgen::generate_stream_with_drifts(
                args.generator,
                args.length,
                &drifts,
                args.seed,
                args.noise,
            )?;
            let meta = json!({ "generator": args.generator, "seed": args.seed, "drifts": drifts });
            let path = args
                .output
                .clone()
                .unwrap_or_else(|| out.join(format!("{}.csv", args.generator)));
            let mut w = create(&path)?;
            write_stream_csv(&mut w, &samples, Some(&meta))?;
            w.flush()?;
            path
        }
        GenKind::Trace => {
            let kind = args.drift_kind;
            let position = if kind == DriftKind::Normal {
                0
            } else {
                args.position.unwrap_or(args.length / 2)
            };
            let width = if kind.has_width() { args.drift_width } else { 0 };
            let params = TraceParams::new(args.base_rate, args.drift_rate);
            let trace = simulate_error_trace(kind, args.length, &params, width, position, args.seed)?;
            let drifts: Vec<DriftSpec> = match kind {
                DriftKind::Normal => Vec::new(),
                _ => vec![DriftSpec {
                    kind,
                    position,
                    width,
                    magnitude: args.drift_rate - args.base_rate,
                }],
            };
            let meta = json!({ "generator": "error-trace", "seed": args.seed, "drifts": drifts });
            let path = args.output.clone().unwrap_or_else(|| out.join("trace.txt"));
            let mut w = create(&path)?;
            write_trace(&mut w, &trace, Some(&meta))?;
            w.flush()?;
            path
        }
    };
    println!("{}", path.display());
    outcome.outputs.push(path);
    Ok(outcome)
}

// ---------------------------------------------------------------- train

/// Window size recorded by `gen` next to the corpus.
fn corpus_window_size(corpus: &Path) -> Option<usize> {
    let dir = corpus.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(dir.join("gen_manifest.json")).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v["config"]["window"]["n"].as_u64().map(|n| n as usize)
}

fn write_loss_curve(path: &Path, report: &TrainReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "episode,loss,validation_loss,validation_accuracy")?;
    let mut checks = report.validation.iter().peekable();
    for (i, loss) in report.losses.iter().enumerate() {
        match checks.next_if(|(e, _, _)| *e == i) {
            Some((_, vl, va)) => writeln!(w, "{i},{loss},{vl},{va}")?,
            None => writeln!(w, "{i},{loss},,")?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn train(args: &TrainArgs, out: &Path) -> Result<Outcome> {
    let n = match args.n.or_else(|| corpus_window_size(&args.corpus)) {
        Some(n) => n,
        None => bail!("window size unknown: pass --n (no gen manifest next to the corpus)"),
    };
    let corpus = read_meta_corpus(open(&args.corpus)?, n, &args.corpus.display().to_string())?;
    let l = corpus.first().map_or(0, |s| s.gaps.len());
    let window = WindowSpec::new(n, l)?;
    let cfg = TrainConfig {
        architecture: args.arch,
        episodes: args.episodes,
        episode: EpisodeSpec {
            support: args.ns,
            query: args.nq,
        },
        final_support: args.final_support,
        learning_rate: args.lr,
        patience: args.patience,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let (detector, report) = train_meta_detector(&corpus, window, &cfg)?;

    let ckpt = args.output.clone().unwrap_or_else(|| out.join("checkpoint.json"));
    let mut w = create(&ckpt)?;
    detector.save(&mut w)?;
    w.flush()?;
    let curve = ckpt.with_file_name(format!(
        "{}_loss.csv",
        ckpt.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint")
    ));
    write_loss_curve(&curve, &report)?;
    log::info!(
        "trained {} for {} episodes (best {})",
        args.arch,
        report.episodes_run,
        report.best_episode
    );
    println!("{}", ckpt.display());
    Ok(Outcome {
        config: json!({ "args": args, "train": cfg, "window": window }),
        seed: Some(args.seed),
        inputs: vec![args.corpus.clone()],
        outputs: vec![ckpt, curve],
    })
}

// ---------------------------------------------------------------- detect

enum Input {
    Trace(Vec<u8>),
    Stream(Vec<Sample>),
}

fn read_input(path: &Path) -> Result<(Input, Option<Vec<DriftSpec>>)> {
    let is_csv = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (input, meta) = if is_csv {
        let file = read_stream_csv(open(path)?)?;
        (Input::Stream(file.samples), file.meta)
    } else {
        let (trace, meta) = read_trace(open(path)?)?;
        (Input::Trace(trace.into_inner()), meta)
    };
    let drifts = match meta.as_ref().and_then(|m| m.get("drifts")) {
        Some(d) => Some(serde_json::from_value(d.clone()).context("reading the drift schedule header")?),
        None => None,
    };
    Ok((input, drifts))
}

fn active_config(args: &DetectArgs) -> ActiveConfig {
    let mut cfg = ActiveConfig::default();
    if let Some(b) = args.budget {
        cfg.label_budget = Some(b);
    }
    if let Some(h) = args.entropy_threshold {
        cfg.entropy_threshold = h;
    }
    if let Some(e) = args.expiry {
        cfg.query_expiry = e;
    }
    if let Some(m) = args.update_mode {
        cfg.update_mode = m;
    }
    if let Some(w) = args.warmup {
        cfg.warmup = w;
    }
    cfg
}

#[derive(Debug, Serialize)]
struct DetectionSummary {
    oracle: OracleKind,
    elements: usize,
    emissions: usize,
    alarms: usize,
    events: usize,
    queries: usize,
    labels_applied: usize,
    /// Prequential accuracy of the monitored learner (streams only).
    accuracy: Option<f64>,
    resets: Vec<usize>,
}

/// `detect`, and `serve` with `serving` set.
pub fn detect(args: &DetectArgs, out: &Path, serving: bool) -> Result<Outcome> {
    let oracle_kind = match (serving, args.oracle) {
        (true, Some(OracleKind::Service) | None) => OracleKind::Service,
        (true, Some(other)) => bail!("serve always uses the service oracle, got --oracle {other:?}"),
        (false, o) => o.unwrap_or(OracleKind::None),
    };
    let detector = MetaDetector::load(open(&args.checkpoint)?)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let (input, drifts) = read_input(&args.input)?;
    let cfg = active_config(args);
    let oracle: Option<Box<dyn Oracle>> = match oracle_kind {
        OracleKind::None => None,
        OracleKind::Service => Some(Box::new(ServiceOracle)),
        OracleKind::GroundTruth => {
            let Some(d) = drifts.as_deref() else {
                bail!("{} has no drift schedule header for the ground-truth oracle", args.input.display());
            };
            Some(Box::new(GroundTruthOracle::new(d)))
        }
    };
    let mut active = ActiveDetector::new(detector, cfg.clone(), oracle)?;

    let server = if oracle_kind == OracleKind::Service {
        let addr = format!("{}:{}", args.host, args.port)
            .parse()
            .with_context(|| format!("bad address {}:{}", args.host, args.port))?;
        let s = ServerHandle::spawn(active.queue(), addr).context("starting the label service")?;
        eprintln!("label API on http://{}/api", s.addr());
        Some(s)
    } else {
        None
    };
    let pace = Duration::from_millis(args.pace_ms.unwrap_or(if serving { 250 } else { 0 }));
    let window = active.detector().window;

    let (elements, accuracy, resets) = match &input {
        Input::Trace(trace) => {
            for (t, &e) in trace.iter().enumerate() {
                active.observe(e)?;
                if !pace.is_zero() && (t + 1) % window.n == 0 {
                    std::thread::sleep(pace);
                }
            }
            (trace.len(), None, Vec::new())
        }
        Input::Stream(samples) => {
            let mut seen = 0usize;
            let mut hook = |t: usize, error: bool| {
                seen += 1;
                if !pace.is_zero() && (t + 1).is_multiple_of(window.n) {
                    std::thread::sleep(pace);
                }
                metadrift::baselearner::ResetHook::observe(&mut active, t, error)
            };
            let result = prequential_run(samples, &mut hook)?;
            (seen, Some(result.accuracy), result.resets)
        }
    };
    let run = active.finish();

    let events_path = out.join("events.csv");
    let mut w = create(&events_path)?;
    write_event_log(&mut w, &run.alarms)?;
    let queries_path = out.join("queries.jsonl");
    write_query_log(create(&queries_path)?, &run.queries)?;
    let summary = DetectionSummary {
        oracle: oracle_kind,
        elements,
        emissions: run.emissions,
        alarms: run.alarms.len(),
        events: run.events().count(),
        queries: run.queries.len(),
        labels_applied: run.labels_applied,
        accuracy,
        resets,
    };
    let summary_path = out.join("detection.json");
    serde_json::to_writer_pretty(create(&summary_path)?, &summary)?;
    let mut outputs = vec![events_path, queries_path, summary_path];
    if run.labels_applied > 0 {
        let p = out.join("checkpoint_updated.json");
        let mut w = create(&p)?;
        run.detector.save(&mut w)?;
        w.flush()?;
        outputs.push(p);
    }
    println!(
        "{} emissions, {} alarms ({} events), {} queries, {} labels applied",
        summary.emissions, summary.alarms, summary.events, summary.queries, summary.labels_applied
    );

    if let Some(s) = server {
        if args.linger {
            eprintln!("input exhausted; label API stays up until interrupted");
            s.wait()?;
        } else {
            s.shutdown()?;
        }
    }
    Ok(Outcome {
        config: json!({ "args": args, "oracle": oracle_kind, "active": cfg, "window": window }),
        seed: None,
        inputs: vec![args.checkpoint.clone(), args.input.clone()],
        outputs,
    })
}

// ---------------------------------------------------------------- bench

pub fn bench(args: &BenchArgs, out: &Path) -> Result<Outcome> {
    let mut cfg = ExperimentConfig {
        seed: args.seed,
        ..ExperimentConfig::default()
    };
    let mut inputs = Vec::new();
    for training in [
        &mut cfg.exp1.training,
        &mut cfg.exp2.training,
        &mut cfg.exp3.training,
        &mut cfg.exp4.training,
    ] {
        if let Some(p) = args.train_per_class {
            training.train_per_class = p;
        }
        if let Some(e) = args.episodes {
            training.episodes = e;
        }
    }
    if !args.generators.is_empty() {
        cfg.exp3.generators = args.generators.clone();
    }
    if let Some(s) = args.seeds {
        cfg.exp3.seeds = s;
    }
    if let Some(l) = args.length {
        cfg.exp3.length = l;
    }
    if args.experiment == ExperimentId::Exp4 {
        if args.datasets.is_empty() {
            let (samples, drifts) = elec_like_stream(args.elec_length, args.seed)?;
            let path = out.join("elec_like.csv");
            let meta = json!({ "generator": "elec-like", "seed": args.seed, "drifts": drifts });
            let mut w = create(&path)?;
            write_stream_csv(&mut w, &samples, Some(&meta))?;
            w.flush()?;
            cfg.exp4.datasets = vec![path];
        } else {
            cfg.exp4.datasets = args.datasets.clone();
        }
        inputs = cfg.exp4.datasets.clone();
    }

    let report = run_experiment(args.experiment, &cfg)?;
    let name = args.experiment.as_str();
    let json_path = out.join(format!("{name}_report.json"));
    let mut w = create(&json_path)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    let table = report.to_table();
    let txt_path = out.join(format!("{name}_report.txt"));
    std::fs::write(&txt_path, &table).with_context(|| format!("cannot write {}", txt_path.display()))?;
    print!("{table}");
    Ok(Outcome {
        config: json!({ "args": args, "experiment": cfg }),
        seed: Some(args.seed),
        inputs,
        outputs: vec![json_path, txt_path],
    })
}
