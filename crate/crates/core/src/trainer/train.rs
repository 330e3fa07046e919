use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::data::embed_features;
use super::metrics::{append_metrics, read_metrics, write_metrics, MetricsRow};
use super::schedule::{compute_steps, eval_steps, EarlyStopping};
use crate::diffmath::ParamStore;
use crate::error::{Error, Result};
use crate::eval::{extract_best_span, report, EvalReport, Prediction, DEFAULT_THRESHOLD};
use crate::heads::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::heads::HeadModel;
use crate::loss::span_loss;
use crate::optim::{adam_update, AdamState};
use crate::squad::{
    batch_indices, featurize_all, read_squad_file, split_train_eval, EmbeddedSequence, FeaturizeMode, SquadExample,
};

pub const BEST_CHECKPOINT: &str = "best.shlb";
pub const LAST_CHECKPOINT: &str = "last.shlb";
pub const OPTIMIZER_STATE: &str = "optimizer.shlb";
pub const TRAIN_STATE: &str = "state.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const RUN_CONFIG: &str = "run_config.json";

/// Examples per parallel work unit. Gradients are summed in example order
/// regardless of threading, so results do not depend on the thread count.
const GRAD_GROUP: usize = 8;

/// Featurized, embedded train and eval splits.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Vec<EmbeddedSequence>,
    pub eval: Vec<EmbeddedSequence>,
    pub eval_examples: Vec<SquadExample>,
}

pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let examples = read_squad_file(&cfg.squad)?;
    let (train_ex, eval_ex) = if cfg.split_fraction == 0.0 {
        (examples.clone(), examples)
    } else {
        split_train_eval(&examples, cfg.split_fraction, cfg.seed)
    };
    let train_feats = featurize_all(&train_ex, cfg.max_seq_len, FeaturizeMode::Train)?;
    let eval_feats = featurize_all(&eval_ex, cfg.max_seq_len, FeaturizeMode::Eval)?;
    info!(
        "{} training features ({} examples skipped), {} eval features",
        train_feats.len(),
        train_ex.len() - train_feats.len(),
        eval_feats.len()
    );
    let hidden = cfg.head.hidden_size;
    Ok(PreparedData {
        train: embed_features(&train_feats, &cfg.embeddings, hidden)?,
        eval: embed_features(&eval_feats, &cfg.embeddings, hidden)?,
        eval_examples: eval_ex,
    })
}

/// Result of scoring a model on a set of sequences.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// Mean span loss without dropout.
    pub loss: f64,
    pub predictions: Vec<Prediction>,
    /// At the default threshold.
    pub report: EvalReport,
}

pub fn evaluate_sequences(
    model: &HeadModel,
    params: &ParamStore<f32>,
    sequences: &[EmbeddedSequence],
    examples: &[SquadExample],
    max_answer_len: usize,
) -> Result<Evaluation> {
    if sequences.is_empty() {
        return Err(Error::Invalid("evaluation set is empty".into()));
    }
    let scored: Vec<(f64, Prediction)> = sequences
        .par_iter()
        .map(|seq| {
            let logits = model.logits(params, seq)?;
            let f = &seq.feature;
            let loss = span_loss(&logits, f.start_pos, f.end_pos)?.loss;
            Ok((f64::from(loss), extract_best_span(&logits, f, max_answer_len)?))
        })
        .collect::<Result<_>>()?;
    let loss = scored.iter().map(|s| s.0).sum::<f64>() / scored.len() as f64;
    let predictions: Vec<Prediction> = scored.into_iter().map(|s| s.1).collect();
    let report = report(&predictions, examples, DEFAULT_THRESHOLD)?;
    Ok(Evaluation {
        loss,
        predictions,
        report,
    })
}

fn mix(seed: u64, step: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = seed
        .wrapping_add(step.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn example_gradients(
    model: &HeadModel,
    params: &ParamStore<f32>,
    seq: &EmbeddedSequence,
    dropout_seed: u64,
) -> Result<(f64, ParamStore<f32>)> {
    let mut local = params.clone();
    local.zero_grads();
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let f = &seq.feature;
    let pass = model.forward(&local, &seq.embeddings, f.valid_len, Some(&mut rng))?;
    let out = span_loss(&pass.logits, f.start_pos, f.end_pos)?;
    model.backward(&mut local, &pass, &out.dstart, &out.dend)?;
    Ok((f64::from(out.loss), local))
}

/// Mean loss over the batch; leaves the mean gradient in `params`.
pub fn batch_gradients(
    model: &HeadModel,
    params: &mut ParamStore<f32>,
    data: &[EmbeddedSequence],
    batch: &[usize],
    seed: u64,
    step: u64,
    single_thread: bool,
) -> Result<f64> {
    params.zero_grads();
    let mut loss = 0.0;
    for (g, group) in batch.chunks(GRAD_GROUP).enumerate() {
        let work = |(k, &i): (usize, &usize)| {
            example_gradients(model, params, &data[i], mix(seed, step, (g * GRAD_GROUP + k) as u64))
        };
        let results: Vec<(f64, ParamStore<f32>)> = if single_thread {
            group.iter().enumerate().map(work).collect::<Result<_>>()?
        } else {
            group.par_iter().enumerate().map(work).collect::<Result<_>>()?
        };
        for (l, grads) in results {
            loss += l;
            params.add_grads_from(&grads)?;
        }
    }
    let n = batch.len() as f32;
    params.scale_grads(1.0 / n);
    Ok(loss / f64::from(n))
}

/// Progress persisted next to the checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainState {
    step: u64,
    early_stopping: EarlyStopping,
    best_eval_loss: Option<f64>,
    stopped: bool,
    /// Running training-loss sum and count since the last metrics row.
    loss_sum: f64,
    loss_count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub total_steps: u64,
    pub eval_events: u64,
    /// Steps completed, including any before a resume.
    pub steps_done: u64,
    pub stopped_early: bool,
    pub rows: Vec<MetricsRow>,
    pub best_eval_loss: Option<f64>,
    pub out_dir: PathBuf,
}

fn save_optimizer(path: &Path, cfg: &RunConfig, adam: &AdamState) -> Result<()> {
    let named = adam
        .first_moment
        .iter()
        .map(|(n, t)| (format!("m/{n}"), t.clone()))
        .chain(adam.second_moment.iter().map(|(n, t)| (format!("v/{n}"), t.clone())))
        .collect();
    Checkpoint {
        digest: cfg.head.digest(),
        tensors: named,
    }
    .save(path)
}

fn load_optimizer(path: &Path, cfg: &RunConfig, adam: &mut AdamState) -> Result<()> {
    let ck = Checkpoint::load(path)?;
    if ck.digest != cfg.head.digest() {
        return Err(Error::DigestMismatch);
    }
    for (name, t) in ck.tensors {
        let (map, key) = if let Some(k) = name.strip_prefix("m/") {
            (&mut adam.first_moment, k)
        } else if let Some(k) = name.strip_prefix("v/") {
            (&mut adam.second_moment, k)
        } else {
            return Err(Error::Format(format!("unexpected optimizer record `{name}`")));
        };
        let slot = map
            .get_mut(key)
            .ok_or_else(|| Error::Format(format!("optimizer record for unknown parameter `{key}`")))?;
        slot.check_same_shape("optimizer state", &t)?;
        *slot = t;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn append_timing(path: &Path, step: u64, seconds: f64) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{step},{seconds:.3}").map_err(|e| Error::io(path, e))
}

/// Load, split, featurize and embed the data, then train.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    train_prepared(cfg, &data)
}

/// Train on already prepared data. Writes checkpoints, optimizer state,
/// metrics and timing files into `cfg.out_dir`.
pub fn train_prepared(cfg: &RunConfig, data: &PreparedData) -> Result<TrainOutcome> {
    let n = data.train.len();
    if n == 0 {
        return Err(Error::Invalid("no usable training examples".into()));
    }
    let (total, events) = compute_steps(n as u64, cfg.epochs, cfg.batch_size as u64);
    if total == 0 {
        return Err(Error::InvalidConfig {
            field: "batch_size",
            reason: format!("{n} examples x {} epochs gives no full batch of {}", cfg.epochs, cfg.batch_size),
        });
    }
    let eval_at = eval_steps(total, events);
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = |name: &str| out.join(name);

    let model = HeadModel::new(cfg.head.clone())?;
    let mut adam_cfg = cfg.adam.clone();
    adam_cfg.total_steps = total;

    let (mut params, mut adam, mut state, mut rows) = if cfg.resume {
        let params = load_checkpoint(&path(LAST_CHECKPOINT), &cfg.head)?;
        let state: TrainState = read_json(&path(TRAIN_STATE))?;
        let mut adam = AdamState::new(adam_cfg, &params);
        adam.step = state.step;
        load_optimizer(&path(OPTIMIZER_STATE), cfg, &mut adam)?;
        let rows: Vec<MetricsRow> = read_metrics(&path(METRICS_CSV))?
            .into_iter()
            .filter(|r| r.step <= state.step)
            .collect();
        write_metrics(&path(METRICS_CSV), &rows)?;
        info!("resuming at step {} of {total}", state.step);
        (params, adam, state, rows)
    } else {
        let params = model.init_params(cfg.seed)?;
        let adam = AdamState::new(adam_cfg, &params);
        write_json(&path(RUN_CONFIG), cfg)?;
        write_metrics(&path(METRICS_CSV), &[])?;
        std::fs::write(path(TIMING_CSV), "step,wall_seconds\n").map_err(|e| Error::io(path(TIMING_CSV), e))?;
        let state = TrainState {
            step: 0,
            early_stopping: EarlyStopping::new(cfg.early_stop_patience),
            best_eval_loss: None,
            stopped: false,
            loss_sum: 0.0,
            loss_count: 0,
        };
        (params, adam, state, Vec::new())
    };

    let limit = cfg.stop_after.map_or(total, |s| s.min(total));
    let batches_per_epoch = n.div_ceil(cfg.batch_size) as u64;
    let mut order: Option<(u64, Vec<Vec<usize>>)> = None;
    let clock = Instant::now();
    let save_progress = |params: &ParamStore<f32>, adam: &AdamState, state: &TrainState| -> Result<()> {
        save_checkpoint(&path(LAST_CHECKPOINT), &cfg.head, params)?;
        save_optimizer(&path(OPTIMIZER_STATE), cfg, adam)?;
        write_json(&path(TRAIN_STATE), state)
    };

    while state.step < limit && !state.stopped {
        let epoch = state.step / batches_per_epoch;
        if order.as_ref().is_none_or(|(e, _)| *e != epoch) {
            order = Some((epoch, batch_indices(n, cfg.batch_size, cfg.seed, epoch)));
        }
        let batch = &order.as_ref().expect("set above").1[(state.step % batches_per_epoch) as usize];
        let loss = batch_gradients(&model, &mut params, &data.train, batch, cfg.seed, state.step, cfg.single_thread)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: format!("training loss at step {}", state.step + 1),
            });
        }
        let lr = adam_update(&mut params, &mut adam)?;
        state.step += 1;
        state.loss_sum += loss;
        state.loss_count += 1;

        if eval_at.binary_search(&state.step).is_ok() {
            let ev = evaluate_sequences(&model, &params, &data.eval, &data.eval_examples, cfg.max_answer_len)?;
            if !ev.loss.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("eval loss at step {}", state.step),
                });
            }
            let elapsed = clock.elapsed().as_secs_f64();
            let row = MetricsRow {
                step: state.step,
                train_loss: state.loss_sum / state.loss_count as f64,
                eval_loss: ev.loss,
                eval_em: ev.report.overall_em,
                eval_f1: ev.report.overall_f1,
                learning_rate: lr,
                // Wall time would break byte-identical reruns; timing.csv keeps it.
                wall_seconds: if cfg.single_thread { 0.0 } else { elapsed },
            };
            info!(
                "step {}: train loss {:.4}, eval loss {:.4}, EM {:.2}, F1 {:.2}",
                row.step, row.train_loss, row.eval_loss, row.eval_em, row.eval_f1
            );
            append_metrics(&path(METRICS_CSV), &row)?;
            append_timing(&path(TIMING_CSV), state.step, elapsed)?;
            rows.push(row);
            state.loss_sum = 0.0;
            state.loss_count = 0;
            state.stopped = state.early_stopping.observe(ev.loss);
            if state.early_stopping.improved() {
                save_checkpoint(&path(BEST_CHECKPOINT), &cfg.head, &params)?;
                state.best_eval_loss = Some(ev.loss);
            }
            save_progress(&params, &adam, &state)?;
            if state.stopped {
                info!("early stop at step {}", state.step);
            }
        }
    }
    save_progress(&params, &adam, &state)?;

    Ok(TrainOutcome {
        total_steps: total,
        eval_events: events,
        steps_done: state.step,
        stopped_early: state.stopped,
        rows,
        best_eval_loss: state.best_eval_loss,
        out_dir: out.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_separates_keys() {
        assert_ne!(mix(1, 2, 3), mix(1, 3, 2));
        assert_ne!(mix(0, 0, 0), mix(0, 0, 1));
        assert_eq!(mix(5, 6, 7), mix(5, 6, 7));
    }

    #[test]
    fn optimizer_state_round_trip() {
        use crate::heads::{HeadConfig, HeadVariant};
        use crate::trainer::EmbeddingSource;
        let dir = tempfile::tempdir().unwrap();
        let head = HeadConfig::new(HeadVariant::FullyConnected, 8);
        let cfg = RunConfig::new(
            head.clone(),
            "x".into(),
            EmbeddingSource::Synthetic { hidden: 8, seed: 0 },
            dir.path().into(),
        );
        let params = HeadModel::new(head).unwrap().init_params(0).unwrap();
        let mut adam = AdamState::new(Default::default(), &params);
        adam.first_moment.values_mut().for_each(|t| t.fill(0.5));
        adam.second_moment.values_mut().for_each(|t| t.fill(0.25));
        let p = dir.path().join("o.shlb");
        save_optimizer(&p, &cfg, &adam).unwrap();
        let mut back = AdamState::new(Default::default(), &params);
        load_optimizer(&p, &cfg, &mut back).unwrap();
        assert_eq!(back.first_moment, adam.first_moment);
        assert_eq!(back.second_moment, adam.second_moment);
    }
}
