use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::EmbeddingSource;
use super::data::embed_features;
use crate::error::Result;
use crate::eval::files::write_report;
use crate::eval::{
    extract_best_span, read_prediction_files, report, sweep_null_threshold, write_prediction_files, EvalReport,
    Prediction, ThresholdSweep, DEFAULT_THRESHOLD,
};
use crate::heads::checkpoint::load_checkpoint;
use crate::heads::{HeadConfig, HeadModel};
use crate::squad::{featurize_all, read_squad_file, FeaturizeMode};

#[derive(Clone, Debug, PartialEq)]
pub struct PredictConfig {
    pub head: HeadConfig,
    pub checkpoint: PathBuf,
    pub squad: PathBuf,
    pub embeddings: EmbeddingSource,
    pub max_seq_len: usize,
    pub max_answer_len: usize,
    pub predictions_out: PathBuf,
    pub null_odds_out: PathBuf,
}

/// Run the checkpointed head over every question and write the predictions
/// and null-odds files. The checkpoint must match `cfg.head`.
pub fn predict(cfg: &PredictConfig) -> Result<Vec<Prediction>> {
    let params = load_checkpoint(&cfg.checkpoint, &cfg.head)?;
    let model = HeadModel::new(cfg.head.clone())?;
    let examples = read_squad_file(&cfg.squad)?;
    let features = featurize_all(&examples, cfg.max_seq_len, FeaturizeMode::Eval)?;
    let sequences = embed_features(&features, &cfg.embeddings, cfg.head.hidden_size)?;
    let predictions: Vec<Prediction> = sequences
        .par_iter()
        .map(|seq| extract_best_span(&model.logits(&params, seq)?, &seq.feature, cfg.max_answer_len))
        .collect::<Result<_>>()?;
    write_prediction_files(&predictions, &cfg.predictions_out, &cfg.null_odds_out)?;
    Ok(predictions)
}

/// Report written by `evaluate`: the thresholded report's fields at the top
/// level plus the report at the default threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationOutcome {
    #[serde(flatten)]
    pub thresholded: EvalReport,
    pub unthresholded: EvalReport,
    #[serde(skip)]
    pub sweep: ThresholdSweep,
}

/// Sweep the null threshold, then report at the best one and at the default.
pub fn evaluate(
    predictions_path: &Path,
    null_odds_path: &Path,
    squad_path: &Path,
    report_out: Option<&Path>,
) -> Result<EvaluationOutcome> {
    let predictions = read_prediction_files(predictions_path, null_odds_path, DEFAULT_THRESHOLD)?;
    let examples = read_squad_file(squad_path)?;
    let sweep = sweep_null_threshold(&predictions, &examples)?;
    let outcome = EvaluationOutcome {
        thresholded: report(&predictions, &examples, sweep.tau)?,
        unthresholded: report(&predictions, &examples, DEFAULT_THRESHOLD)?,
        sweep,
    };
    if let Some(p) = report_out {
        write_report(p, &outcome)?;
    }
    Ok(outcome)
}
