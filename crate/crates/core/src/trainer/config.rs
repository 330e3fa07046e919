use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_MAX_ANSWER_LEN;
use crate::heads::HeadConfig;
use crate::optim::AdamConfig;

/// Where token embeddings come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    Synthetic { hidden: usize, seed: u64 },
    File(PathBuf),
}

impl FromStr for EmbeddingSource {
    type Err = Error;

    /// `synthetic:H,seed` or a path to a BEMB file.
    fn from_str(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("synthetic:") else {
            return Ok(EmbeddingSource::File(PathBuf::from(s)));
        };
        let bad = || Error::InvalidConfig {
            field: "embeddings",
            reason: format!("expected `synthetic:H,seed`, got `{s}`"),
        };
        let (h, seed) = rest.split_once(',').ok_or_else(bad)?;
        Ok(EmbeddingSource::Synthetic {
            hidden: h.trim().parse().map_err(|_| bad())?,
            seed: seed.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingSource::Synthetic { hidden, seed } => write!(f, "synthetic:{hidden},{seed}"),
            EmbeddingSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub head: HeadConfig,
    pub squad: PathBuf,
    pub embeddings: EmbeddingSource,
    /// Fraction of articles held out for evaluation. Zero evaluates on the
    /// training set itself.
    pub split_fraction: f64,
    pub seed: u64,
    pub epochs: u64,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub max_answer_len: usize,
    /// `total_steps` is filled in from the step formula at train time.
    pub adam: AdamConfig,
    pub early_stop_patience: usize,
    pub out_dir: PathBuf,
    /// Run per-example gradients sequentially.
    pub single_thread: bool,
    /// Continue from the checkpoint state in `out_dir`.
    pub resume: bool,
    /// Stop after this many steps even if the schedule is longer.
    pub stop_after: Option<u64>,
}

impl RunConfig {
    pub fn new(head: HeadConfig, squad: PathBuf, embeddings: EmbeddingSource, out_dir: PathBuf) -> Self {
        Self {
            head,
            squad,
            embeddings,
            split_fraction: 0.10,
            seed: 0,
            epochs: 1,
            batch_size: 32,
            max_seq_len: 384,
            max_answer_len: DEFAULT_MAX_ANSWER_LEN,
            adam: AdamConfig::default(),
            early_stop_patience: 3,
            out_dir,
            single_thread: false,
            resume: false,
            stop_after: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.head.validate()?;
        let invalid = |field, reason: &str| Err(Error::InvalidConfig {
            field,
            reason: reason.to_owned(),
        });
        if self.epochs == 0 {
            return invalid("epochs", "must be at least 1");
        }
        if self.batch_size == 0 {
            return invalid("batch_size", "must be at least 1");
        }
        if self.max_answer_len == 0 {
            return invalid("max_answer_len", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.split_fraction) {
            return invalid("split_fraction", "must be in [0, 1)");
        }
        if !(self.adam.base_lr > 0.0 && self.adam.base_lr.is_finite()) {
            return invalid("lr", "must be positive and finite");
        }
        if let EmbeddingSource::Synthetic { hidden, .. } = self.embeddings {
            if hidden != self.head.hidden_size {
                return invalid("embeddings", "synthetic width differs from the head's hidden size");
            }
        }
        if !self.squad.is_file() {
            return Err(Error::InvalidConfig {
                field: "squad",
                reason: format!("`{}` is not a readable file", self.squad.display()),
            });
        }
        if let EmbeddingSource::File(p) = &self.embeddings {
            if !p.is_file() {
                return Err(Error::InvalidConfig {
                    field: "embeddings",
                    reason: format!("`{}` is not a readable file", p.display()),
                });
            }
        }
        Ok(())
    }
}
