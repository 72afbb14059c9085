use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metadrift::active::UpdateMode;
use metadrift::evalharness::ExperimentId;
use metadrift::protonet::Architecture;
use metadrift::streamgen::{DriftKind, GeneratorKind};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "metadrift", version, about = "Meta-learned concept drift detection workbench")]
pub struct Cli {
    /// Directory for outputs and run manifests.
    #[arg(short, long, global = true, env = "METADRIFT_OUT", default_value = ".")]
    pub out: PathBuf,

    /// `key = value` file of default flags for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a meta-corpus, a toy feature stream or an error trace.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Train a meta-detector on a meta-corpus.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Run Meta-DD or Meta-ADD over a trace or stream.
    #[command(args_override_self = true)]
    Detect(DetectArgs),
    /// Run one of the benchmark experiments.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
    /// Detect with the label API up, for a human oracle.
    #[command(args_override_self = true)]
    Serve(DetectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    MetaCorpus,
    Toy,
    Trace,
}

/// `lo,hi`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range(pub f64, pub f64);

impl std::str::FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
        let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
        let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
        if lo > hi {
            return Err(format!("{lo} > {hi}"));
        }
        Ok(Range(lo, hi))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; defaults to a name under `--out`.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Meta-corpus: traces per class.
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    /// Meta-corpus: number of gaps per meta-sample.
    #[arg(long, required_if_eq("kind", "meta-corpus"))]
    pub l: Option<usize>,
    /// Meta-corpus: tumbling-window size.
    #[arg(long, required_if_eq("kind", "meta-corpus"))]
    pub n: Option<usize>,
    /// Meta-corpus: pre-drift error rate range.
    #[arg(long)]
    pub base_error: Option<Range>,
    /// Meta-corpus: error increase range.
    #[arg(long)]
    pub severity: Option<Range>,

    /// Toy stream generator.
    #[arg(long, default_value = "sea")]
    pub generator: GeneratorKind,
    #[arg(long, default_value_t = 10_000)]
    pub length: usize,
    /// Toy stream: evenly spaced drifts cycling sudden, gradual, incremental.
    #[arg(long, default_value_t = 3)]
    pub drifts: usize,
    #[arg(long, default_value_t = 500)]
    pub drift_width: usize,
    /// Toy stream: label noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,

    /// Trace: drift type.
    #[arg(long, default_value = "normal")]
    pub drift_kind: DriftKind,
    /// Trace: error rate before the drift.
    #[arg(long, default_value_t = 0.1)]
    pub base_rate: f64,
    /// Trace: error rate after the drift.
    #[arg(long, default_value_t = 0.5)]
    pub drift_rate: f64,
    /// Trace: drift onset (default: middle).
    #[arg(long)]
    pub position: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Window size the corpus was built with (read from its gen manifest
    /// when omitted).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value = "fcn")]
    pub arch: Architecture,
    /// Support samples per class per episode.
    #[arg(long, default_value_t = 5)]
    pub ns: usize,
    /// Query samples per class per episode.
    #[arg(long, default_value_t = 15)]
    pub nq: usize,
    #[arg(long, default_value_t = 2000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 100)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Samples per class averaged into the final prototypes.
    #[arg(long, default_value_t = 20)]
    pub final_support: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    GroundTruth,
    Service,
    None,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Error trace (one 0/1 per line) or stream CSV (`.csv`).
    #[arg(long)]
    pub input: PathBuf,
    /// Label source; `none` runs the frozen detector.
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    /// Label budget per run.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Entropy (nats) above which a prediction is queried.
    #[arg(long)]
    pub entropy_threshold: Option<f64>,
    /// Emissions after which an unanswered query expires.
    #[arg(long)]
    pub expiry: Option<usize>,
    #[arg(long)]
    pub update_mode: Option<UpdateMode>,
    /// Errors ignored after start and after each learner reset.
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long, default_value_t = label_service::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Delay per window emission, so a human can keep up.
    #[arg(long)]
    pub pace_ms: Option<u64>,
    /// Keep the label API up after the input is exhausted.
    #[arg(long)]
    pub linger: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    pub experiment: ExperimentId,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// exp3: generators to run.
    #[arg(long, value_delimiter = ',')]
    pub generators: Vec<GeneratorKind>,
    /// exp3: streams per generator.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// exp3: stream length.
    #[arg(long)]
    pub length: Option<usize>,
    /// exp4: dataset files (CSV or ARFF); a synthetic Elec-like stream is
    /// generated when none are given.
    #[arg(long, value_delimiter = ',')]
    pub datasets: Vec<PathBuf>,
    /// exp4: length of the generated Elec-like stream.
    #[arg(long, default_value_t = 45_312)]
    pub elec_length: usize,
    /// Training traces per class for every meta-detector.
    #[arg(long)]
    pub train_per_class: Option<usize>,
    /// Training episodes for every meta-detector.
    #[arg(long)]
    pub episodes: Option<usize>,
}
