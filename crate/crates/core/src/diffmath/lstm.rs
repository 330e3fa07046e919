//! Single LSTM step over the concatenated input `[x_t; h_prev]`.
//!
//! Weights are one `(H + D) x 4D` matrix whose column blocks are the input,
//! forget, cell-candidate and output gates, in that order; the bias is `4D`.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CELL: usize = 2;
pub const GATE_OUTPUT: usize = 3;

/// Result of one step, with everything the backward pass needs.
#[derive(Clone, Debug)]
pub struct LstmStep<T: Scalar> {
    pub h: Vec<T>,
    pub c: Vec<T>,
    concat: Vec<T>,
    gates: Vec<T>,
    c_prev: Vec<T>,
    tanh_c: Vec<T>,
}

pub struct LstmStepGrads<T: Scalar> {
    pub dx: Vec<T>,
    pub dh_prev: Vec<T>,
    pub dc_prev: Vec<T>,
}

fn check_shapes<T: Scalar>(input: usize, hidden: usize, w: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if w.shape() != [input + hidden, 4 * hidden] || b.shape() != [4 * hidden] {
        return Err(Error::ShapeMismatch {
            op: "lstm_cell",
            left: vec![input + hidden, 4 * hidden],
            right: w.shape().to_vec(),
        });
    }
    Ok(())
}

pub fn lstm_cell<T: Scalar>(
    x_t: &[T],
    h_prev: &[T],
    c_prev: &[T],
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<LstmStep<T>> {
    let d = h_prev.len();
    if c_prev.len() != d {
        return Err(Error::ShapeMismatch {
            op: "lstm_cell state",
            left: vec![d],
            right: vec![c_prev.len()],
        });
    }
    check_shapes(x_t.len(), d, w, b)?;
    let cols = 4 * d;
    let mut concat = Vec::with_capacity(x_t.len() + d);
    concat.extend_from_slice(x_t);
    concat.extend_from_slice(h_prev);

    let mut z = b.data().to_vec();
    let wd = w.data();
    for (r, &v) in concat.iter().enumerate() {
        if v == T::ZERO {
            continue;
        }
        for (zk, &wk) in z.iter_mut().zip(&wd[r * cols..(r + 1) * cols]) {
            *zk += v * wk;
        }
    }
    let mut gates = z;
    for (k, g) in gates.iter_mut().enumerate() {
        *g = if k / d == GATE_CELL { g.tanh() } else { g.sigmoid() };
    }

    let mut c = vec![T::ZERO; d];
    let mut h = vec![T::ZERO; d];
    let mut tanh_c = vec![T::ZERO; d];
    for j in 0..d {
        let i = gates[GATE_INPUT * d + j];
        let f = gates[GATE_FORGET * d + j];
        let g = gates[GATE_CELL * d + j];
        let o = gates[GATE_OUTPUT * d + j];
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        h[j] = o * tanh_c[j];
    }
    Ok(LstmStep {
        h,
        c,
        concat,
        gates,
        c_prev: c_prev.to_vec(),
        tanh_c,
    })
}

/// Backward through one step. `dh` and `dc` are the gradients arriving at
/// this step's outputs; weight and bias gradients are accumulated in place.
pub fn lstm_cell_backward<T: Scalar>(
    step: &LstmStep<T>,
    w: &Tensor<T>,
    dh: &[T],
    dc: &[T],
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
) -> Result<LstmStepGrads<T>> {
    let d = step.h.len();
    let input = step.concat.len() - d;
    check_shapes(input, d, w, db)?;
    w.check_same_shape("lstm_cell_backward", dw)?;
    if dh.len() != d || dc.len() != d {
        return Err(Error::ShapeMismatch {
            op: "lstm_cell_backward",
            left: vec![d],
            right: vec![dh.len(), dc.len()],
        });
    }
    let cols = 4 * d;
    let mut dz = vec![T::ZERO; cols];
    let mut dc_prev = vec![T::ZERO; d];
    for j in 0..d {
        let i = step.gates[GATE_INPUT * d + j];
        let f = step.gates[GATE_FORGET * d + j];
        let g = step.gates[GATE_CELL * d + j];
        let o = step.gates[GATE_OUTPUT * d + j];
        let tc = step.tanh_c[j];
        let dct = dc[j] + dh[j] * o * (T::ONE - tc * tc);
        dz[GATE_OUTPUT * d + j] = dh[j] * tc * o * (T::ONE - o);
        dz[GATE_FORGET * d + j] = dct * step.c_prev[j] * f * (T::ONE - f);
        dz[GATE_INPUT * d + j] = dct * g * i * (T::ONE - i);
        dz[GATE_CELL * d + j] = dct * i * (T::ONE - g * g);
        dc_prev[j] = dct * f;
    }

    for (acc, &g) in db.data_mut().iter_mut().zip(&dz) {
        *acc += g;
    }
    let wd = w.data();
    let dwd = dw.data_mut();
    let mut dconcat = vec![T::ZERO; input + d];
    for (r, &v) in step.concat.iter().enumerate() {
        let wr = &wd[r * cols..(r + 1) * cols];
        let mut acc = T::ZERO;
        for (&wk, &gk) in wr.iter().zip(&dz) {
            acc += wk * gk;
        }
        dconcat[r] = acc;
        if v != T::ZERO {
            for (dwk, &gk) in dwd[r * cols..(r + 1) * cols].iter_mut().zip(&dz) {
                *dwk += v * gk;
            }
        }
    }
    let dh_prev = dconcat.split_off(input);
    Ok(LstmStepGrads {
        dx: dconcat,
        dh_prev,
        dc_prev,
    })
}
