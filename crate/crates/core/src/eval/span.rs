use crate::diffmath::Scalar;
use crate::error::{Error, Result};
use crate::heads::SpanLogits;
use crate::squad::Feature;

pub const DEFAULT_MAX_ANSWER_LEN: usize = 30;

/// Threshold applied when no sweep has been run.
pub const DEFAULT_THRESHOLD: f64 = 0.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub qid: String,
    /// Decided answer; empty means null.
    pub text: String,
    /// Best non-null span text; empty when the feature has no valid span.
    pub nonnull_text: String,
    /// Token positions of the best non-null span.
    pub span: Option<(usize, usize)>,
    /// `-inf` when no valid span exists.
    pub best_nonnull_score: f64,
    pub null_score: f64,
    /// `null_score - best_nonnull_score`; `+inf` when no valid span exists.
    pub score_diff: f64,
}

impl Prediction {
    /// Rebuild a prediction from the on-disk pair (answer text, score diff).
    /// Individual scores are not stored, so only their difference is kept.
    pub fn from_parts(qid: impl Into<String>, nonnull_text: impl Into<String>, score_diff: f64, tau: f64) -> Self {
        let nonnull_text = nonnull_text.into();
        let score_diff = if nonnull_text.is_empty() { f64::INFINITY } else { score_diff };
        let mut p = Self {
            qid: qid.into(),
            text: String::new(),
            nonnull_text,
            span: None,
            best_nonnull_score: f64::NEG_INFINITY,
            null_score: f64::NAN,
            score_diff,
        };
        p.apply_threshold(tau);
        p
    }

    /// Null iff there is no span or `score_diff > tau`.
    pub fn is_null_at(&self, tau: f64) -> bool {
        self.nonnull_text.is_empty() || self.score_diff > tau
    }

    pub fn decide(&self, tau: f64) -> &str {
        if self.is_null_at(tau) {
            ""
        } else {
            &self.nonnull_text
        }
    }

    pub fn apply_threshold(&mut self, tau: f64) {
        self.text = self.decide(tau).to_owned();
    }
}

/// Highest-scoring `(i, j)` over context positions with `i <= j` and
/// `j - i + 1 <= max_answer_len`. Ties keep the smaller `i`, then smaller `j`.
pub fn best_span<T: Scalar>(
    logits: &SpanLogits<T>,
    feature: &Feature,
    max_answer_len: usize,
) -> Option<((usize, usize), f64)> {
    let lo = feature.context_offset;
    let hi = (lo + feature.context_len).min(feature.valid_len).min(logits.len());
    let mut best: Option<((usize, usize), f64)> = None;
    for i in lo..hi {
        let s = logits.start[i].to_f64();
        for j in i..hi.min(i + max_answer_len) {
            let score = s + logits.end[j].to_f64();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some(((i, j), score));
            }
        }
    }
    best
}

/// Pick the best non-null span and the null score, deciding at [`DEFAULT_THRESHOLD`].
pub fn extract_best_span<T: Scalar>(
    logits: &SpanLogits<T>,
    feature: &Feature,
    max_answer_len: usize,
) -> Result<Prediction> {
    if max_answer_len == 0 {
        return Err(Error::InvalidConfig {
            field: "max_answer_len",
            reason: "must be at least 1".into(),
        });
    }
    if logits.end.len() != logits.len() || logits.len() < feature.valid_len || logits.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "extract_best_span",
            left: vec![logits.start.len(), logits.end.len()],
            right: vec![feature.valid_len],
        });
    }
    let null_score = logits.start[0].to_f64() + logits.end[0].to_f64();
    let (span, nonnull_text, best_nonnull_score) = match best_span(logits, feature, max_answer_len) {
        Some(((i, j), score)) => (Some((i, j)), feature.span_text(i, j).unwrap_or_default(), score),
        None => (None, String::new(), f64::NEG_INFINITY),
    };
    let mut p = Prediction {
        qid: feature.qid.clone(),
        text: String::new(),
        nonnull_text,
        span,
        best_nonnull_score,
        null_score,
        score_diff: null_score - best_nonnull_score,
    };
    p.apply_threshold(DEFAULT_THRESHOLD);
    Ok(p)
}
