//! Context CNN with per-sequence generated filters.
//!
//! Stage 1: a shared generator convolution of width `w_g` maps the `L x H`
//! sequence to `L x (w_a*H*C)`; a max over valid positions turns that into
//! one `w_a x H` filter per output channel. Stage 2: those filters are
//! convolved (same padding) over the same sequence, plus a learned bias,
//! followed by ReLU. Generator weights are the only learned filter state;
//! the applied filters exist only for the sequence that produced them.

use rand_chacha::ChaCha8Rng;

use super::config::HeadConfig;
use crate::diffmath::ops::same_padding_left;
use crate::diffmath::{
    conv1d, conv1d_backward, glorot_bound, max_over_rows, relu, relu_backward, ParamStore, Scalar, Tensor,
};
use crate::error::Result;

pub const GENERATOR_KERNEL: &str = "generator.kernel";
pub const GENERATOR_BIAS: &str = "generator.bias";
pub const APPLIED_BIAS: &str = "applied.bias";

#[derive(Clone, Debug)]
pub(super) struct Cache<T: Scalar> {
    x: Tensor<T>,
    generator_width: usize,
    /// Winning position for each generated coefficient.
    argmax: Vec<usize>,
    filters: Tensor<T>,
    activations: Tensor<T>,
}

pub(super) fn init(cfg: &HeadConfig, ps: &mut ParamStore<f32>, rng: &mut ChaCha8Rng) -> Result<usize> {
    let h = cfg.hidden_size;
    let g = cfg.generated_filter_len();
    let wg = cfg.generator_width;
    ps.insert(
        GENERATOR_KERNEL,
        Tensor::uniform(&[wg, h, g], glorot_bound(wg * h, wg * g), rng),
    )?;
    ps.insert(GENERATOR_BIAS, Tensor::zeros(&[g]))?;
    ps.insert(APPLIED_BIAS, Tensor::zeros(&[cfg.context_out_channels]))?;
    Ok(cfg.context_out_channels)
}

fn generate<T: Scalar>(
    cfg: &HeadConfig,
    ps: &ParamStore<T>,
    x: &Tensor<T>,
    valid_len: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let summaries = conv1d(x, ps.get(GENERATOR_KERNEL)?, ps.get(GENERATOR_BIAS)?)?;
    let (pooled, argmax) = max_over_rows(&summaries, valid_len)?;
    // Generator channel (i*H + h)*C + c is coefficient [i, h, c] of the
    // applied kernel, so the pooled vector reshapes directly.
    let filters = pooled.reshape(&[cfg.applied_width, cfg.hidden_size, cfg.context_out_channels])?;
    Ok((filters, argmax))
}

/// The `w_a x H x C` filters the generator produces for one sequence.
pub fn generate_filters<T: Scalar>(
    cfg: &HeadConfig,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    valid_len: usize,
) -> Result<Tensor<T>> {
    Ok(generate(cfg, params, x, valid_len)?.0)
}

pub(super) fn forward<T: Scalar>(
    cfg: &HeadConfig,
    ps: &ParamStore<T>,
    x: &Tensor<T>,
    valid_len: usize,
) -> Result<(Tensor<T>, Cache<T>)> {
    let (filters, argmax) = generate(cfg, ps, x, valid_len)?;
    let activations = relu(&conv1d(x, &filters, ps.get(APPLIED_BIAS)?)?);
    Ok((
        activations.clone(),
        Cache {
            x: x.clone(),
            generator_width: cfg.generator_width,
            argmax,
            filters,
            activations,
        },
    ))
}

pub(super) fn backward<T: Scalar>(ps: &mut ParamStore<T>, cache: &Cache<T>, dfeats: &Tensor<T>) -> Result<()> {
    let dz = relu_backward(&cache.activations, dfeats);
    let applied = conv1d_backward(&cache.x, &cache.filters, &dz)?;
    ps.accumulate_grad(APPLIED_BIAS, &applied.dbias)?;

    // Each pooled coefficient came from a single position, so the generator
    // gradient only touches the window around that position.
    let dpooled = applied.dkernel.data();
    let (len, hidden) = cache.x.dims2("context_cnn backward")?;
    let channels = dpooled.len();
    let width = cache.generator_width;
    let pad = same_padding_left(width);
    let mut dkernel = Tensor::zeros(&[width, hidden, channels]);
    let mut dbias = Tensor::zeros(&[channels]);
    let dk = dkernel.data_mut();
    for (o, (&pos, &g)) in cache.argmax.iter().zip(dpooled).enumerate() {
        if g == T::ZERO {
            continue;
        }
        dbias.data_mut()[o] += g;
        for i in 0..width {
            let Some(src) = (pos + i).checked_sub(pad).filter(|&s| s < len) else {
                continue;
            };
            for (h, &xv) in cache.x.row(src).iter().enumerate() {
                dk[(i * hidden + h) * channels + o] += xv * g;
            }
        }
    }
    ps.accumulate_grad(GENERATOR_KERNEL, &dkernel)?;
    ps.accumulate_grad(GENERATOR_BIAS, &dbias)?;
    Ok(())
}
