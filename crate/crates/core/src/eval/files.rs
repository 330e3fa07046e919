//! Predictions, null-odds and report files.
//!
//! Predictions map qid to the best non-null answer text (empty only when
//! no span was possible). Null-odds map qid to `score_diff`; since JSON has
//! no infinity, `+inf` is stored as `f64::MAX`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::span::Prediction;
use crate::error::{Error, Result};

pub const INFINITE_ODDS: f64 = f64::MAX;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn predictions_map(predictions: &[Prediction]) -> BTreeMap<String, String> {
    predictions.iter().map(|p| (p.qid.clone(), p.nonnull_text.clone())).collect()
}

pub fn null_odds_map(predictions: &[Prediction]) -> BTreeMap<String, f64> {
    predictions
        .iter()
        .map(|p| {
            let d = if p.score_diff == f64::INFINITY { INFINITE_ODDS } else { p.score_diff };
            (p.qid.clone(), d)
        })
        .collect()
}

/// Write both files; entries are sorted by qid so output is deterministic.
pub fn write_prediction_files(predictions: &[Prediction], predictions_path: &Path, null_odds_path: &Path) -> Result<()> {
    if let Some(p) = predictions.iter().find(|p| p.score_diff.is_nan()) {
        return Err(Error::NonFinite {
            what: format!("score_diff of `{}`", p.qid),
        });
    }
    write_json(predictions_path, &predictions_map(predictions))?;
    write_json(null_odds_path, &null_odds_map(predictions))
}

/// Join the two maps. Any qid present in only one of them is an error.
pub fn predictions_from_maps(
    texts: BTreeMap<String, String>,
    odds: BTreeMap<String, f64>,
    tau: f64,
) -> Result<Vec<Prediction>> {
    let only_texts: Vec<String> = texts.keys().filter(|q| !odds.contains_key(*q)).cloned().collect();
    if !only_texts.is_empty() {
        return Err(Error::MissingQids {
            side: "null-odds file",
            qids: only_texts,
        });
    }
    let only_odds: Vec<String> = odds.keys().filter(|q| !texts.contains_key(*q)).cloned().collect();
    if !only_odds.is_empty() {
        return Err(Error::MissingQids {
            side: "predictions file",
            qids: only_odds,
        });
    }
    Ok(texts
        .into_iter()
        .map(|(qid, text)| {
            let d = odds[&qid];
            let d = if d >= INFINITE_ODDS { f64::INFINITY } else { d };
            Prediction::from_parts(qid, text, d, tau)
        })
        .collect())
}

pub fn read_prediction_files(predictions_path: &Path, null_odds_path: &Path, tau: f64) -> Result<Vec<Prediction>> {
    let texts: BTreeMap<String, String> = read_json(predictions_path)?;
    let odds: BTreeMap<String, f64> = read_json(null_odds_path)?;
    predictions_from_maps(texts, odds, tau)
}

pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    write_json(path, report)
}
