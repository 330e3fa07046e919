use rand_chacha::ChaCha8Rng;

use super::config::HeadConfig;
use crate::diffmath::lstm::GATE_FORGET;
use crate::diffmath::{glorot_bound, lstm_cell, lstm_cell_backward, LstmStep, ParamStore, Scalar, Tensor};
use crate::error::Result;

pub const LSTM_WEIGHT: &str = "lstm.weight";
pub const LSTM_BIAS: &str = "lstm.bias";

#[derive(Clone, Debug)]
pub(super) struct Cache<T: Scalar> {
    steps: Vec<LstmStep<T>>,
}

pub(super) fn init(cfg: &HeadConfig, ps: &mut ParamStore<f32>, rng: &mut ChaCha8Rng) -> Result<usize> {
    let (h, d) = (cfg.hidden_size, cfg.lstm_hidden);
    ps.insert(
        LSTM_WEIGHT,
        Tensor::uniform(&[h + d, 4 * d], glorot_bound(h + d, 4 * d), rng),
    )?;
    let mut bias = Tensor::zeros(&[4 * d]);
    bias.data_mut()[GATE_FORGET * d..(GATE_FORGET + 1) * d].fill(1.0);
    ps.insert(LSTM_BIAS, bias)?;
    Ok(d)
}

/// Unrolls left to right over the first `valid_len` rows from zero state.
/// Rows past `valid_len` get zero hidden state.
pub(super) fn forward<T: Scalar>(
    ps: &ParamStore<T>,
    x: &Tensor<T>,
    valid_len: usize,
) -> Result<(Tensor<T>, Cache<T>)> {
    let w = ps.get(LSTM_WEIGHT)?;
    let b = ps.get(LSTM_BIAS)?;
    let d = b.len() / 4;
    let len = x.dim(0);
    let mut hidden = Tensor::zeros(&[len, d]);
    let mut steps: Vec<LstmStep<T>> = Vec::with_capacity(valid_len);
    let zeros = vec![T::ZERO; d];
    for t in 0..valid_len {
        let (h_prev, c_prev) = match steps.last() {
            Some(s) => (s.h.as_slice(), s.c.as_slice()),
            None => (zeros.as_slice(), zeros.as_slice()),
        };
        let step = lstm_cell(x.row(t), h_prev, c_prev, w, b)?;
        hidden.row_mut(t).copy_from_slice(&step.h);
        steps.push(step);
    }
    Ok((hidden, Cache { steps }))
}

/// Backpropagation through time.
pub(super) fn backward<T: Scalar>(ps: &mut ParamStore<T>, cache: &Cache<T>, dhidden: &Tensor<T>) -> Result<()> {
    let w = ps.get(LSTM_WEIGHT)?.clone();
    let d = dhidden.dim(1);
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[4 * d]);
    let mut dh_next = vec![T::ZERO; d];
    let mut dc_next = vec![T::ZERO; d];
    for (t, step) in cache.steps.iter().enumerate().rev() {
        let dh: Vec<T> = dhidden.row(t).iter().zip(&dh_next).map(|(&a, &b)| a + b).collect();
        let g = lstm_cell_backward(step, &w, &dh, &dc_next, &mut dw, &mut db)?;
        dh_next = g.dh_prev;
        dc_next = g.dc_prev;
    }
    ps.accumulate_grad(LSTM_WEIGHT, &dw)?;
    ps.accumulate_grad(LSTM_BIAS, &db)?;
    Ok(())
}
