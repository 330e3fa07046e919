use super::tensor::Scalar;
use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let Some(max) = logits.iter().copied().reduce(Scalar::max) else {
        return Vec::new();
    };
    let mut out: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p = *p / sum);
    out
}

/// `-log softmax(logits)[target]` and its gradient `softmax - onehot(target)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if target >= logits.len() {
        return Err(Error::IndexOutOfRange {
            what: "cross-entropy target",
            index: target,
            len: logits.len(),
        });
    }
    let max = logits.iter().copied().reduce(Scalar::max).unwrap_or(T::ZERO);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum_exp: T = exps.iter().copied().sum();
    // Only differences of logits enter, so a common shift that is exact in
    // floating point leaves the loss bit-identical.
    let loss = sum_exp.ln() + (max - logits[target]);
    let mut grad: Vec<T> = exps.into_iter().map(|e| e / sum_exp).collect();
    grad[target] -= T::ONE;
    Ok((loss, grad))
}
