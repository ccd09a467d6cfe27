//! Datasets, the training loop and evaluation metrics.

mod dataset;
mod labels;
mod manifest;
mod metrics;
mod trainer;

pub use dataset::{check_compatible, load_samples, Sample};
pub use labels::MoodCluster;
pub use manifest::{DatasetManifest, FeatureRecord, Split};
pub use metrics::{f1, format_ablation_table, ClassScores, ConfusionMatrix, EvalReport};
pub use trainer::{
    dropout_seed, epoch_order, evaluate, predict, train, train_with, EpochRecord, Precision, TrainOptions, TrainOutcome,
};
