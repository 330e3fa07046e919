//! SQuAD 2.0 ingestion, featurization, splitting, batching and embeddings.

mod batch;
pub mod bemb;
mod embed;
mod feature;
mod json;
mod split;
pub mod synthetic;
mod tokenize;

pub use batch::{batch_indices, batches};
pub use bemb::{load_embeddings, open_bemb, pad_record, write_bemb, BembReader, BembWriter};
pub use embed::{position_vector, synthetic_embed, token_vector};
pub use feature::{featurize, featurize_all, Feature, FeaturizeMode, CLS, PAD, SEP};
pub use json::{parse_squad_json, parse_squad_value, read_squad_file};
pub use split::split_train_eval;
pub use synthetic::synthetic_squad;
pub use tokenize::{slice_chars, tokenize, Token};

use crate::diffmath::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub text: String,
    /// Character (code point) offset into the context.
    pub char_start: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquadExample {
    pub qid: String,
    pub question: String,
    pub context: String,
    /// Empty for unanswerable questions.
    pub answers: Vec<Answer>,
    pub is_impossible: bool,
    /// Index of the source article in the document.
    pub article: usize,
}

impl SquadExample {
    pub fn gold_texts(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.text.as_str()).collect()
    }
}

/// A feature paired with its `max_seq_len x H` embedding matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedSequence {
    pub feature: Feature,
    pub embeddings: Tensor<f32>,
}

impl EmbeddedSequence {
    #[cfg(test)]
    pub(crate) fn for_test(len: usize, hidden: usize) -> Self {
        let ex = SquadExample {
            qid: "t".into(),
            question: "q".into(),
            context: "x ".repeat(len),
            answers: vec![],
            is_impossible: true,
            article: 0,
        };
        let feature = featurize(&ex, len, FeaturizeMode::Eval).unwrap().unwrap();
        synthetic_embed(&feature, hidden, 0).unwrap()
    }
}
