//! Benchmark harness: meta-corpus construction, drift-detection scoring,
//! dataset ingestion and the four experiments.

mod corpus;
mod experiments;
mod ingest;
mod metrics;

pub use corpus::{build_meta_corpus, draw_trace, CorpusConfig, TraceDraw, TraceRanges};
pub use experiments::{
    elec_like_stream, run_experiment, run_method, sub_seed, train_on_corpus, Exp1Config, Exp2Config, Exp3Config,
    Exp4Config, ExperimentConfig, ExperimentId, ExperimentReport, GridCell, MetaAccuracy, MetaTraining, Method,
    MethodRun, MethodSummary, StreamRun,
};
pub use ingest::{ingest_reader, ingest_real_dataset, Dataset, DatasetSchema, Format};
pub use metrics::{drift_f1, DriftScore};
