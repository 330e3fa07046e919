//! Deterministic synthetic token embeddings standing in for a frozen encoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EmbeddedSequence, Feature};
use crate::diffmath::Tensor;
use crate::error::{Error, Result};

pub const POSITION_SCALE: f32 = 0.1;
pub const SEGMENT_SCALE: f32 = 0.2;
const SEGMENT_KEY: &str = "\u{0}segment";

/// Unit vector keyed by `(token, seed)`.
pub fn token_vector(token: &str, hidden: usize, seed: u64) -> Vec<f32> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut v: Vec<f64> = (0..hidden).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x /= norm);
    v.into_iter().map(|x| x as f32).collect()
}

/// Sinusoidal position code scaled by [`POSITION_SCALE`].
pub fn position_vector(pos: usize, hidden: usize) -> Vec<f32> {
    (0..hidden)
        .map(|k| {
            let rate = 10000f64.powf(-((k / 2 * 2) as f64) / hidden as f64);
            let angle = pos as f64 * rate;
            let v = if k % 2 == 0 { angle.sin() } else { angle.cos() };
            POSITION_SCALE * v as f32
        })
        .collect()
}

/// Embed a feature: token vector + position code + segment offset for
/// context-side tokens. Rows past `valid_len` are zero.
pub fn synthetic_embed(feature: &Feature, hidden: usize, seed: u64) -> Result<EmbeddedSequence> {
    if hidden < 8 {
        return Err(Error::InvalidConfig {
            field: "hidden_size",
            reason: format!("synthetic embeddings need H >= 8, got {hidden}"),
        });
    }
    let len = feature.max_seq_len();
    let segment: Vec<f32> = token_vector(SEGMENT_KEY, hidden, seed)
        .into_iter()
        .map(|v| SEGMENT_SCALE * v)
        .collect();
    let mut emb = Tensor::zeros(&[len, hidden]);
    for (pos, token) in feature.tokens[..feature.valid_len].iter().enumerate() {
        let row = emb.row_mut(pos);
        let tv = token_vector(token, hidden, seed);
        let pv = position_vector(pos, hidden);
        let on_context = feature.segment(pos) == 1;
        for k in 0..hidden {
            row[k] = tv[k] + pv[k] + if on_context { segment[k] } else { 0.0 };
        }
    }
    Ok(EmbeddedSequence {
        feature: feature.clone(),
        embeddings: emb,
    })
}
