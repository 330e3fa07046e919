use std::collections::HashMap;

use rayon::prelude::*;

use super::config::EmbeddingSource;
use crate::error::{Error, Result};
use crate::squad::{open_bemb, pad_record, synthetic_embed, EmbeddedSequence, Feature};

/// Attach embeddings to every feature, in feature order. File records for
/// questions outside `features` are ignored; features without a record are
/// an error.
pub fn embed_features(features: &[Feature], source: &EmbeddingSource, hidden: usize) -> Result<Vec<EmbeddedSequence>> {
    match source {
        EmbeddingSource::Synthetic { hidden: h, seed } => {
            if *h != hidden {
                return Err(Error::ShapeMismatch {
                    op: "synthetic embedding width",
                    left: vec![hidden],
                    right: vec![*h],
                });
            }
            features.par_iter().map(|f| synthetic_embed(f, hidden, *seed)).collect()
        }
        EmbeddingSource::File(path) => {
            let reader = open_bemb(path)?;
            if reader.hidden() != hidden {
                return Err(Error::ShapeMismatch {
                    op: "BEMB hidden size",
                    left: vec![hidden],
                    right: vec![reader.hidden()],
                });
            }
            let by_qid: HashMap<&str, usize> = features.iter().enumerate().map(|(i, f)| (f.qid.as_str(), i)).collect();
            let mut slots: Vec<Option<EmbeddedSequence>> = vec![None; features.len()];
            for rec in reader {
                let (qid, emb) = rec?;
                if let Some(&i) = by_qid.get(qid.as_str()) {
                    slots[i] = Some(pad_record(&features[i], &emb, hidden)?);
                }
            }
            let missing: Vec<String> = slots
                .iter()
                .zip(features)
                .filter(|(s, _)| s.is_none())
                .map(|(_, f)| f.qid.clone())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingQids {
                    side: "embeddings file",
                    qids: missing,
                });
            }
            Ok(slots.into_iter().flatten().collect())
        }
    }
}
