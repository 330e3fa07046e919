//! Training, prediction and evaluation pipelines behind the command line.

mod config;
mod data;
pub mod metrics;
mod predict;
mod schedule;
mod train;

pub use config::{EmbeddingSource, RunConfig};
pub use data::embed_features;
pub use metrics::{read_metrics, MetricsRow};
pub use predict::{evaluate, predict, EvaluationOutcome, PredictConfig};
pub use schedule::{compute_steps, eval_steps, EarlyStopping};
pub use train::{
    batch_gradients, evaluate_sequences, prepare_data, train, train_prepared, Evaluation, PreparedData, TrainOutcome,
    BEST_CHECKPOINT, LAST_CHECKPOINT, METRICS_CSV, OPTIMIZER_STATE, RUN_CONFIG, TIMING_CSV, TRAIN_STATE,
};
