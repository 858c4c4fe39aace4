//! End-to-end harness: synthetic streams, source pre-training, method
//! runners and report persistence.

mod budget;
mod config;
mod driver;
mod report;
mod runner;
mod stream;

pub use budget::{marginal_gain_curve, BudgetPoint};
pub use config::{standard_controller, GammaSetting, RunConfig, STANDARD_EPSILON};
pub use driver::{
    execute, load_bank, prepare_bundle, resolve_gamma, write_outputs, RunOutcome, BANK_FILE,
    BATCHES_FILE, CHECKPOINT_FILE, SUMMARY_FILE,
};
pub use report::{
    compare, read_batches_csv, write_batches_csv, Comparison, RunSummary, BATCHES_CSV_HEADER,
    BATCHES_CSV_VERSION, SUMMARY_SCHEMA_VERSION,
};
pub use runner::{
    calibrate_bundle_gamma, clean_stem_stats, run_method, run_method_with_bank, BatchRecord,
    Method, RunReport, SourceBundle, SourceConfig,
};
pub use stream::{
    generate_stream, standard_domains, stream_fingerprint, BaseTask, Corruption, CorruptionKind,
    DomainSpec, LabeledBatch, Stream, StreamConfig, TaskSampler, STANDARD_DRIFT,
};
