use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the metrics CSV, written at every evaluation event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    /// Mean training loss over the steps since the previous row.
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_em: f64,
    pub eval_f1: f64,
    pub learning_rate: f64,
    pub wall_seconds: f64,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Rewrite `path` with `rows` (header included).
pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["step", "train_loss", "eval_loss", "eval_em", "eval_f1", "learning_rate", "wall_seconds"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Append one row to an existing CSV.
pub fn append_metrics(path: &Path, row: &MetricsRow) -> Result<()> {
    let file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.serialize(row)?;
    w.flush().map_err(|e| Error::io(path, e))
}
