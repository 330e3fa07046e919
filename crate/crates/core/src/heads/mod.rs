//! Span-prediction heads: fully connected, basic multi-width CNN, context CNN
//! with generated filters, and a unidirectional LSTM.
//!
//! Every head ends in the same per-token affine projection to two logits
//! (start, end). Padded positions are overwritten with [`MASK_LOGIT`].

pub mod checkpoint;
mod cnn;
mod config;
mod context_cnn;
mod lstm;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{HeadConfig, HeadVariant};
pub use context_cnn::generate_filters;

use crate::diffmath::{
    dropout_mask, glorot_bound, matmul_affine, matmul_affine_backward, mul_elementwise, ParamStore,
    Scalar, Tensor,
};
use crate::error::{Error, Result};
use crate::squad::EmbeddedSequence;

/// Logit written at positions beyond the valid length.
pub const MASK_LOGIT: f64 = -1e4;

pub const OUTPUT_WEIGHT: &str = "output.weight";
pub const OUTPUT_BIAS: &str = "output.bias";

#[derive(Clone, Debug, PartialEq)]
pub struct SpanLogits<T: Scalar = f32> {
    pub start: Vec<T>,
    pub end: Vec<T>,
}

impl<T: Scalar> SpanLogits<T> {
    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }
}

/// Cache of the shared output layer.
#[derive(Clone, Debug)]
struct OutputCache<T: Scalar> {
    /// Input to the final affine, after dropout.
    feats: Tensor<T>,
    mask: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
enum VariantCache<T: Scalar> {
    FullyConnected,
    BasicCnn(cnn::Cache<T>),
    ContextCnn(context_cnn::Cache<T>),
    Lstm(lstm::Cache<T>),
}

/// Output of a forward pass plus whatever backward needs.
#[derive(Clone, Debug)]
pub struct ForwardPass<T: Scalar> {
    pub logits: SpanLogits<T>,
    valid_len: usize,
    output: OutputCache<T>,
    inner: VariantCache<T>,
}

/// A span-prediction head. Holds only architecture; weights live in a
/// [`ParamStore`] so one head can serve several precisions and threads.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadModel {
    config: HeadConfig,
}

/// Validate `config` and initialise its parameters deterministically from `seed`.
///
/// Weights are Glorot-uniform, biases zero, LSTM forget-gate bias 1.
pub fn build_head(config: HeadConfig, seed: u64) -> Result<(HeadModel, ParamStore<f32>)> {
    let model = HeadModel::new(config)?;
    let params = model.init_params(seed)?;
    Ok((model, params))
}

impl HeadModel {
    pub fn new(config: HeadConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn variant(&self) -> HeadVariant {
        self.config.variant
    }

    pub fn init_params(&self, seed: u64) -> Result<ParamStore<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamStore::new();
        let feat = match self.config.variant {
            HeadVariant::FullyConnected => self.config.hidden_size,
            HeadVariant::BasicCnn => cnn::init(&self.config, &mut ps, &mut rng)?,
            HeadVariant::ContextCnn => context_cnn::init(&self.config, &mut ps, &mut rng)?,
            HeadVariant::Lstm => lstm::init(&self.config, &mut ps, &mut rng)?,
        };
        ps.insert(
            OUTPUT_WEIGHT,
            Tensor::uniform(&[feat, 2], glorot_bound(feat, 2), &mut rng),
        )?;
        ps.insert(OUTPUT_BIAS, Tensor::zeros(&[2]))?;
        Ok(ps)
    }

    fn check_input<T: Scalar>(&self, x: &Tensor<T>, valid_len: usize) -> Result<usize> {
        let (len, hidden) = x.dims2("head input")?;
        if hidden != self.config.hidden_size {
            return Err(Error::ShapeMismatch {
                op: "head input width",
                left: vec![len, self.config.hidden_size],
                right: x.shape().to_vec(),
            });
        }
        if valid_len == 0 || valid_len > len {
            return Err(Error::IndexOutOfRange {
                what: "valid length",
                index: valid_len,
                len,
            });
        }
        Ok(len)
    }

    /// Forward pass over an `L x H` embedding matrix whose first `valid_len`
    /// rows are real tokens. Dropout is applied only when `dropout_rng` is given.
    pub fn forward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        x: &Tensor<T>,
        valid_len: usize,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardPass<T>> {
        self.check_input(x, valid_len)?;
        let (feats, inner) = match self.config.variant {
            HeadVariant::FullyConnected => (x.clone(), VariantCache::FullyConnected),
            HeadVariant::BasicCnn => {
                let (f, c) = cnn::forward(&self.config, params, x)?;
                (f, VariantCache::BasicCnn(c))
            }
            HeadVariant::ContextCnn => {
                let (f, c) = context_cnn::forward(&self.config, params, x, valid_len)?;
                (f, VariantCache::ContextCnn(c))
            }
            HeadVariant::Lstm => {
                let (f, c) = lstm::forward(params, x, valid_len)?;
                (f, VariantCache::Lstm(c))
            }
        };
        let keep = self.config.dropout_keep_prob;
        let (feats, mask) = match dropout_rng {
            Some(rng) if keep < 1.0 => {
                let mask = dropout_mask(feats.shape(), keep, rng);
                (mul_elementwise(&feats, &mask)?, Some(mask))
            }
            _ => (feats, None),
        };
        let out = matmul_affine(&feats, params.get(OUTPUT_WEIGHT)?, params.get(OUTPUT_BIAS)?)?;
        let len = out.dim(0);
        let masked = T::from_f64(MASK_LOGIT);
        let mut start = Vec::with_capacity(len);
        let mut end = Vec::with_capacity(len);
        for l in 0..len {
            if l < valid_len {
                start.push(out.at2(l, 0));
                end.push(out.at2(l, 1));
            } else {
                start.push(masked);
                end.push(masked);
            }
        }
        Ok(ForwardPass {
            logits: SpanLogits { start, end },
            valid_len,
            output: OutputCache { feats, mask },
            inner,
        })
    }

    /// Inference-mode logits for an embedded sequence.
    pub fn logits(&self, params: &ParamStore<f32>, seq: &EmbeddedSequence) -> Result<SpanLogits<f32>> {
        Ok(self
            .forward(params, &seq.embeddings, seq.feature.valid_len, None)?
            .logits)
    }

    /// Accumulate parameter gradients given gradients w.r.t. the logits.
    /// Gradients at masked positions are ignored.
    pub fn backward<T: Scalar>(
        &self,
        params: &mut ParamStore<T>,
        pass: &ForwardPass<T>,
        dstart: &[T],
        dend: &[T],
    ) -> Result<()> {
        let len = pass.logits.len();
        if dstart.len() != len || dend.len() != len {
            return Err(Error::ShapeMismatch {
                op: "head backward",
                left: vec![len],
                right: vec![dstart.len(), dend.len()],
            });
        }
        let mut dout = Tensor::zeros(&[len, 2]);
        for l in 0..pass.valid_len {
            dout.row_mut(l).copy_from_slice(&[dstart[l], dend[l]]);
        }
        let g = matmul_affine_backward(&pass.output.feats, params.get(OUTPUT_WEIGHT)?, &dout)?;
        params.accumulate_grad(OUTPUT_WEIGHT, &g.dw)?;
        params.accumulate_grad(OUTPUT_BIAS, &g.db)?;
        let dfeats = match &pass.output.mask {
            Some(mask) => mul_elementwise(&g.dx, mask)?,
            None => g.dx,
        };
        match &pass.inner {
            VariantCache::FullyConnected => Ok(()),
            VariantCache::BasicCnn(c) => cnn::backward(&self.config, params, c, &dfeats),
            VariantCache::ContextCnn(c) => context_cnn::backward(params, c, &dfeats),
            VariantCache::Lstm(c) => lstm::backward(params, c, &dfeats),
        }
    }
}

/// Per-token affine head, `H -> 2`.
pub fn fc_forward(model: &HeadModel, params: &ParamStore<f32>, x: &EmbeddedSequence) -> Result<SpanLogits<f32>> {
    expect_variant(model, HeadVariant::FullyConnected)?;
    model.logits(params, x)
}

/// Multi-width ReLU convolutions, channel-concatenated, then `-> 2`.
pub fn basic_cnn_forward(
    model: &HeadModel,
    params: &ParamStore<f32>,
    x: &EmbeddedSequence,
) -> Result<SpanLogits<f32>> {
    expect_variant(model, HeadVariant::BasicCnn)?;
    model.logits(params, x)
}

/// Generated-filter convolution over the same sequence, then `-> 2`.
pub fn context_cnn_forward(
    model: &HeadModel,
    params: &ParamStore<f32>,
    x: &EmbeddedSequence,
) -> Result<SpanLogits<f32>> {
    expect_variant(model, HeadVariant::ContextCnn)?;
    model.logits(params, x)
}

/// Left-to-right LSTM unroll over valid tokens, then `D -> 2` per token.
pub fn lstm_forward(model: &HeadModel, params: &ParamStore<f32>, x: &EmbeddedSequence) -> Result<SpanLogits<f32>> {
    expect_variant(model, HeadVariant::Lstm)?;
    model.logits(params, x)
}

fn expect_variant(model: &HeadModel, variant: HeadVariant) -> Result<()> {
    if model.variant() != variant {
        return Err(Error::InvalidConfig {
            field: "variant",
            reason: format!("expected {variant:?}, model is {:?}", model.variant()),
        });
    }
    Ok(())
}
