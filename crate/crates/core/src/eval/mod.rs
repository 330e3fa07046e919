//! Span extraction, SQuAD 2.0 metrics and null-threshold calibration.

pub mod files;
mod metrics;
mod report;
mod span;
mod threshold;

pub use files::{read_prediction_files, write_prediction_files, write_report};
pub use metrics::{em_score, f1_score, normalize_answer};
pub use report::{report, score_example, EvalReport};
pub use span::{best_span, extract_best_span, Prediction, DEFAULT_MAX_ANSWER_LEN, DEFAULT_THRESHOLD};
pub use threshold::{sweep_null_threshold, ThresholdSweep};
