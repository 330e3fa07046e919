//! Span objective: mean of the start and end cross-entropies.

use crate::diffmath::{softmax_cross_entropy, Scalar};
use crate::heads::SpanLogits;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SpanLossOutput<T: Scalar> {
    pub loss: T,
    pub dstart: Vec<T>,
    pub dend: Vec<T>,
}

/// `0.5 * (CE(start, start_gold) + CE(end, end_gold))`. Unanswerable
/// examples use index 0 for both.
pub fn span_loss<T: Scalar>(logits: &SpanLogits<T>, start_gold: usize, end_gold: usize) -> Result<SpanLossOutput<T>> {
    if logits.start.len() != logits.end.len() {
        return Err(Error::ShapeMismatch {
            op: "span_loss",
            left: vec![logits.start.len()],
            right: vec![logits.end.len()],
        });
    }
    let (ls, mut dstart) = softmax_cross_entropy(&logits.start, start_gold)?;
    let (le, mut dend) = softmax_cross_entropy(&logits.end, end_gold)?;
    let half = T::from_f64(0.5);
    dstart.iter_mut().chain(dend.iter_mut()).for_each(|g| *g *= half);
    Ok(SpanLossOutput {
        loss: half * (ls + le),
        dstart,
        dend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_len() {
        let l = SpanLogits {
            start: vec![0.0f64; 4],
            end: vec![0.0; 4],
        };
        let out = span_loss(&l, 1, 3).unwrap();
        assert!((out.loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_start_leaves_half_end_loss() {
        let mut start = vec![0.0f64; 5];
        start[2] = 60.0;
        let end = vec![0.3, -0.2, 0.1, 0.9, 0.0];
        let out = span_loss(&SpanLogits { start, end: end.clone() }, 2, 3).unwrap();
        let (ce_end, _) = softmax_cross_entropy(&end, 3).unwrap();
        assert!((out.loss - 0.5 * ce_end).abs() < 1e-12);
    }

    #[test]
    fn gradients_sum_to_zero_per_vector() {
        let l = SpanLogits {
            start: vec![0.1f64, 2.0, -1.0],
            end: vec![1.0, 0.0, 0.5],
        };
        let out = span_loss(&l, 0, 2).unwrap();
        assert!(out.dstart.iter().sum::<f64>().abs() < 1e-12);
        assert!(out.dend.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn out_of_range_gold_rejected() {
        let l = SpanLogits {
            start: vec![0.0f64; 3],
            end: vec![0.0; 3],
        };
        assert!(span_loss(&l, 0, 3).is_err());
    }
}
