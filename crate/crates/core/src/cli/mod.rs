//! Library side of the `moodnet` binary: run configuration and commands.

mod commands;
mod config;
mod featurize;

pub use commands::{format_listing, run_eval, run_inspect, run_train, TrainRun, TRAIN_LOG};
pub use config::{ModelSection, OptimSection, PathsSection, RunConfig, CACHE_ENV, FEATURE_MANIFEST};
pub use featurize::{
    featurize, read_raw_manifest, write_raw_manifest, FeaturizeOptions, FeaturizeSummary, RawRecord, RecordFailure,
    FAILURES_FILE,
};
