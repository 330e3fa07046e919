//! Oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spanqa_core::diffmath::{grad_check, GradCheckReport, ParamStore, Tensor};
use spanqa_core::eval::{extract_best_span, report, Prediction};
use spanqa_core::heads::{HeadConfig, HeadModel, HeadVariant, SpanLogits, OUTPUT_BIAS};
use spanqa_core::squad::{featurize, synthetic_squad, Answer, Feature, FeaturizeMode, SquadExample};
use spanqa_core::{span_loss, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small head configs that keep 64-bit gradient checks fast.
pub fn small_head(variant: HeadVariant, hidden: usize) -> HeadConfig {
    let mut c = HeadConfig::new(variant, hidden);
    c.kernel_widths = vec![1, 2, 3];
    c.filters_per_kernel = 3;
    c.lstm_hidden = 5;
    c.context_out_channels = 3;
    c.generator_width = 3;
    c.applied_width = 3;
    c
}

/// Step for end-to-end head checks: a power of two near 1e-5.
///
/// The output bias shifts every valid logit equally, so its true gradient
/// is zero. With the bias at zero and a power-of-two step the shifted
/// logits are exact, the loss is unchanged bit for bit, and the difference
/// quotient is exactly zero instead of one ulp of noise.
pub const HEAD_EPSILON: f64 = 1.0 / 131_072.0;

/// Central-difference check of the full span loss of one head.
pub fn head_grad_check(
    variant: HeadVariant,
    hidden: usize,
    len: usize,
    valid_len: usize,
    seed: u64,
    with_dropout: bool,
) -> Result<GradCheckReport> {
    let model = HeadModel::new(small_head(variant, hidden))?;
    let mut params = model.init_params(seed)?.cast::<f64>();
    // Nonzero hidden biases; the output bias stays at its initial zero.
    let mut r = rng(seed + 1);
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for name in names {
        if name.ends_with("bias") && name != OUTPUT_BIAS {
            let shape = params.get(&name)?.shape().to_vec();
            params.set(&name, Tensor::uniform(&shape, 0.3, &mut r))?;
        }
    }
    let x = Tensor::<f64>::uniform(&[len, hidden], 1.0, &mut r);
    let start = r.random_range(0..valid_len);
    let end = r.random_range(start..valid_len);
    let dropout_seed = seed + 2;
    grad_check(
        |ps: &mut ParamStore<f64>| {
            let mut d = rng(dropout_seed);
            let pass = model.forward(ps, &x, valid_len, with_dropout.then_some(&mut d))?;
            let out = span_loss(&pass.logits, start, end)?;
            model.backward(ps, &pass, &out.dstart, &out.dend)?;
            Ok(out.loss)
        },
        &params,
        HEAD_EPSILON,
    )
}

/// Both context-CNN stages at the default generator and applied widths,
/// `L = 12`, `H = 16`, `C = 4`.
pub fn context_cnn_default_grad_check(seed: u64) -> Result<GradCheckReport> {
    let mut cfg = HeadConfig::new(HeadVariant::ContextCnn, 16);
    cfg.context_out_channels = 4;
    let model = HeadModel::new(cfg)?;
    let mut params = model.init_params(seed)?.cast::<f64>();
    let mut g = rng(seed);
    for name in ["generator.bias", "applied.bias"] {
        let shape = params.get(name)?.shape().to_vec();
        params.set(name, Tensor::uniform(&shape, 0.3, &mut g))?;
    }
    let x = Tensor::<f64>::uniform(&[12, 16], 1.0, &mut g);
    grad_check(
        |ps: &mut ParamStore<f64>| {
            let pass = model.forward(ps, &x, 11, None)?;
            let out = span_loss(&pass.logits, 4, 6)?;
            model.backward(ps, &pass, &out.dstart, &out.dend)?;
            Ok(out.loss)
        },
        &params,
        HEAD_EPSILON,
    )
}

/// Direct triple-loop same-padded cross-correlation.
pub fn conv1d_oracle(x: &[Vec<f64>], kernel: &[Vec<Vec<f64>>], bias: &[f64]) -> Vec<Vec<f64>> {
    let len = x.len();
    let width = kernel.len();
    let left = (width - 1) / 2;
    let filters = bias.len();
    let mut out = vec![vec![0.0; filters]; len];
    for t in 0..len {
        for f in 0..filters {
            let mut acc = bias[f];
            for d in 0..width {
                let src = t as isize + d as isize - left as isize;
                if src < 0 || src >= len as isize {
                    continue;
                }
                for (h, &v) in x[src as usize].iter().enumerate() {
                    acc += v * kernel[d][h][f];
                }
            }
            out[t][f] = acc;
        }
    }
    out
}

/// All admissible `(i, j)` pairs scored, then sorted by score descending and
/// position ascending.
pub fn best_span_oracle(
    logits: &SpanLogits<f64>,
    feature: &Feature,
    max_answer_len: usize,
) -> Option<((usize, usize), f64)> {
    let mut all = Vec::new();
    for i in 1..feature.valid_len {
        for j in i..feature.valid_len {
            if feature.is_context(i) && feature.is_context(j) && j - i < max_answer_len {
                all.push(((i, j), logits.start[i] + logits.end[j]));
            }
        }
    }
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.first().copied()
}

/// Score every candidate threshold through `report` and return the best
/// (smallest on ties).
pub fn exhaustive_sweep(predictions: &[Prediction], examples: &[SquadExample]) -> (f64, f64) {
    let mut taus = vec![f64::NEG_INFINITY];
    taus.extend(predictions.iter().map(|p| p.score_diff).filter(|d| d.is_finite()));
    let scored: Vec<(f64, f64)> = taus
        .iter()
        .map(|&t| (t, report(predictions, examples, t).unwrap().overall_f1))
        .collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|s| s.1 >= best - 1e-9)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

pub fn example(qid: &str, context: &str, answer: Option<&str>) -> SquadExample {
    let answers = answer
        .map(|a| {
            let byte = context.find(a).expect("answer inside context");
            vec![Answer {
                text: a.into(),
                char_start: context[..byte].chars().count(),
            }]
        })
        .unwrap_or_default();
    SquadExample {
        qid: qid.into(),
        question: "which one?".into(),
        context: context.into(),
        is_impossible: answers.is_empty(),
        answers,
        article: 0,
    }
}

const WORDS: [&str; 8] = ["red", "fox", "blue", "owl", "green", "frog", "grey", "wolf"];

/// Mixed answerable/unanswerable examples with predictions whose texts are
/// right, partly right or wrong, and whose score diffs repeat often.
pub fn mixed_fixture(n: usize, seed: u64) -> (Vec<Prediction>, Vec<SquadExample>) {
    let mut r = rng(seed);
    let mut preds = Vec::with_capacity(n);
    let mut exs = Vec::with_capacity(n);
    for i in 0..n {
        let qid = format!("m{i}");
        let a = WORDS[r.random_range(0..4) * 2];
        let b = WORDS[r.random_range(0..4) * 2 + 1];
        let gold = format!("{a} {b}");
        let context = format!("the {gold} ran");
        let answerable = r.random_bool(0.5);
        exs.push(example(&qid, &context, answerable.then_some(gold.as_str())));
        let text = match r.random_range(0..4) {
            0 => gold.clone(),
            1 => a.to_string(),
            2 => format!("{b} ran"),
            _ => "the".to_string(),
        };
        let diff = f64::from(r.random_range(-8i32..8)) * 0.5;
        preds.push(Prediction::from_parts(qid, text, diff, 0.0));
    }
    (preds, exs)
}

/// A deliberately miscalibrated scorer: it finds the gold span but its
/// null score is pushed up by `null_bias`, so at threshold 0 it abstains
/// on answerable questions it would get right.
pub fn miscalibrated_predictions(n: usize, seed: u64, null_bias: f64) -> (Vec<Prediction>, Vec<SquadExample>) {
    let doc = synthetic_squad(n, seed);
    let examples = spanqa_core::squad::parse_squad_value(&doc).unwrap();
    let mut r = rng(seed ^ 0xABCD);
    let preds = examples
        .iter()
        .map(|ex| {
            let f = featurize(ex, 40, FeaturizeMode::Eval).unwrap().unwrap();
            let len = f.max_seq_len();
            let mut start: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
            let mut end: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
            let confidence: f64 = r.random_range(0.0..6.0);
            if ex.is_impossible {
                start[0] += 2.0;
                end[0] += 2.0;
            } else {
                start[f.start_pos] += confidence;
                end[f.end_pos] += confidence;
            }
            start[0] += null_bias;
            end[0] += null_bias;
            extract_best_span(&SpanLogits { start, end }, &f, 30).unwrap()
        })
        .collect();
    (preds, examples)
}

pub fn write_synthetic_squad(path: &Path, n: usize, seed: u64) {
    std::fs::write(path, synthetic_squad(n, seed).to_string()).unwrap();
}
