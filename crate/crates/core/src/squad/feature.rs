use super::tokenize::{slice_chars, tokenize};
use super::SquadExample;
use crate::error::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const PAD: &str = "[PAD]";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeaturizeMode {
    /// Answers cut off by truncation make the example unusable.
    Train,
    /// Answers cut off by truncation become the null span.
    Eval,
}

/// A featurized example: `[CLS] question [SEP] context [SEP]`, padded.
#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub qid: String,
    /// Padded to `max_seq_len` with `[PAD]`.
    pub tokens: Vec<String>,
    pub valid_len: usize,
    /// Index of the first context token.
    pub context_offset: usize,
    /// Number of context tokens kept after truncation.
    pub context_len: usize,
    /// Character span in `context` for each kept context token.
    pub token_to_char: Vec<(usize, usize)>,
    pub start_pos: usize,
    pub end_pos: usize,
    pub context: String,
}

impl Feature {
    pub fn max_seq_len(&self) -> usize {
        self.tokens.len()
    }

    /// Whether position `i` is a context token.
    pub fn is_context(&self, i: usize) -> bool {
        i >= self.context_offset && i < self.context_offset + self.context_len
    }

    /// Context text covered by token positions `start..=end`.
    pub fn span_text(&self, start: usize, end: usize) -> Option<String> {
        if !self.is_context(start) || !self.is_context(end) || end < start {
            return None;
        }
        let (cs, _) = self.token_to_char[start - self.context_offset];
        let (_, ce) = self.token_to_char[end - self.context_offset];
        Some(slice_chars(&self.context, cs, ce))
    }

    /// 0 for `[CLS]`, question tokens and the first `[SEP]`; 1 afterwards.
    pub fn segment(&self, i: usize) -> u8 {
        u8::from(i >= self.context_offset)
    }
}

/// Map an example onto a fixed-length token window. Returns `Ok(None)` when
/// a training example's answer falls outside the truncated context.
pub fn featurize(example: &SquadExample, max_seq_len: usize, mode: FeaturizeMode) -> Result<Option<Feature>> {
    let question = tokenize(&example.question);
    if question.len() + 3 > max_seq_len {
        return Err(Error::InvalidConfig {
            field: "max_seq_len",
            reason: format!(
                "question `{}` has {} tokens; needs max_seq_len >= {}",
                example.qid,
                question.len(),
                question.len() + 3
            ),
        });
    }
    let context = tokenize(&example.context);
    let budget = max_seq_len - question.len() - 3;
    let kept = &context[..context.len().min(budget)];

    let mut tokens = Vec::with_capacity(max_seq_len);
    tokens.push(CLS.to_owned());
    tokens.extend(question.iter().map(|t| t.text.clone()));
    tokens.push(SEP.to_owned());
    let context_offset = tokens.len();
    tokens.extend(kept.iter().map(|t| t.text.clone()));
    tokens.push(SEP.to_owned());
    let valid_len = tokens.len();
    tokens.resize(max_seq_len, PAD.to_owned());

    let (mut start_pos, mut end_pos) = (0, 0);
    if let Some(answer) = example.answers.first().filter(|_| !example.is_impossible) {
        let a_start = answer.char_start;
        let a_end = a_start + answer.text.chars().count();
        let first = context.iter().position(|t| t.char_end > a_start);
        let last = context.iter().rposition(|t| t.char_start < a_end);
        match (first, last) {
            (Some(s), Some(e)) if s <= e && e < kept.len() => {
                start_pos = context_offset + s;
                end_pos = context_offset + e;
            }
            _ if mode == FeaturizeMode::Train => return Ok(None),
            _ => {}
        }
    }

    Ok(Some(Feature {
        qid: example.qid.clone(),
        tokens,
        valid_len,
        context_offset,
        context_len: kept.len(),
        token_to_char: kept.iter().map(|t| (t.char_start, t.char_end)).collect(),
        start_pos,
        end_pos,
        context: example.context.clone(),
    }))
}

/// Featurize many examples, dropping skipped ones.
pub fn featurize_all(examples: &[SquadExample], max_seq_len: usize, mode: FeaturizeMode) -> Result<Vec<Feature>> {
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        if let Some(f) = featurize(ex, max_seq_len, mode)? {
            out.push(f);
        }
    }
    Ok(out)
}
