//! Minimal reverse-mode math kernel: each primitive has an explicit forward
//! function and a matching backward function, plus a finite-difference
//! checker for verifying them.

pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod params;
pub mod softmax;
pub mod tensor;

pub use gradcheck::{grad_check, grad_check_seeded, relative_error, GradCheckReport, DEFAULT_EPSILON};
pub use lstm::{lstm_cell, lstm_cell_backward, LstmStep, LstmStepGrads};
pub use ops::{
    conv1d, conv1d_backward, dropout_mask, matmul_affine, matmul_affine_backward, max_over_rows,
    max_over_rows_backward, mul_elementwise, relu, relu_backward, AffineGrads, Conv1dGrads,
};
pub use params::ParamStore;
pub use softmax::{softmax, softmax_cross_entropy};
pub use tensor::{Scalar, Tensor};

/// Glorot/Xavier uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
