//! Adam with bias correction and a linear warmup / linear decay schedule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffmath::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Learning rate at `step`: linear ramp from 0 to `base_lr` over the first
/// `warmup_fraction * total_steps` steps, then linear decay to 0 at
/// `total_steps`.
pub fn lr_schedule(step: u64, total_steps: u64, warmup_fraction: f64, base_lr: f64) -> f64 {
    if total_steps == 0 {
        return base_lr;
    }
    let step = step.min(total_steps) as f64;
    let total = total_steps as f64;
    let warmup = warmup_fraction.clamp(0.0, 1.0) * total;
    if step < warmup {
        base_lr * step / warmup
    } else if warmup >= total {
        base_lr
    } else {
        base_lr * (total - step) / (total - warmup)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub base_lr: f64,
    pub warmup_fraction: f64,
    pub total_steps: u64,
    /// Decoupled weight decay on non-bias parameters; 0 disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-6,
            base_lr: 3e-4,
            warmup_fraction: 0.1,
            total_steps: 1,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Number of updates applied so far.
    pub step: u64,
    pub first_moment: BTreeMap<String, Tensor<f32>>,
    pub second_moment: BTreeMap<String, Tensor<f32>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore<f32>) -> Self {
        let zeros = || -> BTreeMap<_, _> {
            params
                .iter()
                .map(|(n, t)| (n.to_owned(), Tensor::zeros(t.shape())))
                .collect()
        };
        Self {
            config,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    pub fn current_lr(&self) -> f64 {
        let c = &self.config;
        lr_schedule(self.step, c.total_steps, c.warmup_fraction, c.base_lr)
    }
}

fn is_bias(name: &str) -> bool {
    name.ends_with("bias")
}

/// One Adam step using the gradients held in `params`. The learning rate is
/// the schedule value at the pre-increment step. A non-finite gradient
/// aborts the update before any parameter changes.
pub fn adam_update(params: &mut ParamStore<f32>, state: &mut AdamState) -> Result<f64> {
    for (name, value, grad) in params.iter_with_grads() {
        if let Some(bad) = grad.data().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("gradient of `{name}` at index {bad}"),
            });
        }
        let m = state
            .first_moment
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("no optimizer state for `{name}`")))?;
        value.check_same_shape("adam_update", m)?;
    }

    let c = state.config.clone();
    let lr = state.current_lr();
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let (lr32, eps, wd) = (lr as f32, c.epsilon as f32, c.weight_decay as f32);

    for (name, value, grad) in params.iter_values_mut_with_grads() {
        let m = state.first_moment.get_mut(name).expect("checked above");
        let v = state.second_moment.get_mut(name).expect("checked above");
        let decay = if wd > 0.0 && !is_bias(name) { wd } else { 0.0 };
        for (((p, &g), mi), vi) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *p -= lr32 * (m_hat / (v_hat.sqrt() + eps) + decay * *p);
        }
    }
    Ok(lr)
}
