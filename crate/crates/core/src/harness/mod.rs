//! Experiment orchestration: the (problem, fold, descriptor, optimiser) grid,
//! persisted records, analysis and run-time tables.

mod analyze;
mod config;
mod run;
mod runtime;
mod seeds;

pub use analyze::{analyze, write_report, AnalysisOptions, AnalysisReport};
pub use config::ExperimentConfig;
pub use run::{
    default_key, load_problems, missing_keys, read_jsonl, read_records, run_defaults, run_experiment,
    unit_key, DefaultRecord, EvaluationPoint, ExperimentRecord, FailureRecord, RunSummary, TimingRecord,
    DEFAULTS_FILE, FAILURES_FILE, LOG_DIR, RECORDS_FILE, TIMINGS_FILE,
};
pub use runtime::{report_runtime, runtime_csv, RuntimeRow};
pub use seeds::derive_seed;
