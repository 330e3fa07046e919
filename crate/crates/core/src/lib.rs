//! Extractive question-answering span heads trained over frozen token
//! embeddings, with SQuAD 2.0 data handling and evaluation.

pub mod diffmath;
pub mod error;
pub mod eval;
pub mod heads;
pub mod loss;
pub mod optim;
pub mod squad;
pub mod trainer;

pub use diffmath::{ParamStore, Scalar, Tensor};
pub use error::{Error, Result};
pub use eval::{EvalReport, Prediction};
pub use heads::{build_head, HeadConfig, HeadModel, HeadVariant, SpanLogits};
pub use loss::span_loss;
pub use optim::{adam_update, lr_schedule, AdamConfig, AdamState};
pub use squad::{EmbeddedSequence, Feature, SquadExample};
pub use trainer::{compute_steps, RunConfig};
