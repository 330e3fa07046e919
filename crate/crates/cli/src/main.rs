use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spanqa_core::eval::DEFAULT_MAX_ANSWER_LEN;
use spanqa_core::heads::{HeadConfig, HeadVariant};
use spanqa_core::squad::open_bemb;
use spanqa_core::trainer::{self, EmbeddingSource, PredictConfig, RunConfig, BEST_CHECKPOINT};

#[derive(Parser, Debug)]
#[command(name = "spanqa", version, about = "Train, run and evaluate span QA heads over frozen embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a head and write checkpoints and metrics to --out.
    Train(TrainArgs),
    /// Write predictions and null-odds files for a dataset.
    Predict(PredictArgs),
    /// Tune the null threshold and report EM/F1 per slice.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct HeadArgs {
    /// fc, cnn, ctx-cnn or lstm.
    #[arg(long, env = "SPANQA_HEAD")]
    head: HeadVariant,
    /// Comma-separated convolution widths.
    #[arg(long, env = "SPANQA_KERNEL_WIDTHS", value_delimiter = ',', default_value = "3,5,7")]
    kernel_widths: Vec<usize>,
    #[arg(long, env = "SPANQA_FILTERS", default_value_t = 64)]
    filters: usize,
    #[arg(long, env = "SPANQA_LSTM_HIDDEN", default_value_t = 256)]
    lstm_hidden: usize,
    #[arg(long, env = "SPANQA_CONTEXT_CHANNELS", default_value_t = 16)]
    context_channels: usize,
    #[arg(long, env = "SPANQA_DROPOUT_KEEP", default_value_t = 0.9)]
    dropout_keep: f64,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long, env = "SPANQA_SQUAD")]
    squad: PathBuf,
    /// BEMB file, or `synthetic:H,seed`.
    #[arg(long, env = "SPANQA_EMBEDDINGS")]
    embeddings: EmbeddingSource,
    #[arg(long, env = "SPANQA_MAX_SEQ_LEN", default_value_t = 384)]
    max_seq_len: usize,
    #[arg(long, env = "SPANQA_MAX_ANSWER_LEN", default_value_t = DEFAULT_MAX_ANSWER_LEN)]
    max_answer_len: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    head: HeadArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, env = "SPANQA_EPOCHS", default_value_t = 1)]
    epochs: u64,
    #[arg(long, env = "SPANQA_BATCH_SIZE", default_value_t = 32)]
    batch_size: usize,
    #[arg(long, env = "SPANQA_LR", default_value_t = 3e-4)]
    lr: f64,
    #[arg(long, env = "SPANQA_WARMUP", default_value_t = 0.1)]
    warmup: f64,
    #[arg(long, env = "SPANQA_WEIGHT_DECAY", default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, env = "SPANQA_SEED", default_value_t = 0)]
    seed: u64,
    /// Fraction of articles held out; 0 evaluates on the training set.
    #[arg(long, env = "SPANQA_SPLIT_FRACTION", default_value_t = 0.1)]
    split_fraction: f64,
    /// Eval events without a new loss minimum before stopping; 0 disables.
    #[arg(long, env = "SPANQA_PATIENCE", default_value_t = 3)]
    patience: usize,
    #[arg(long, env = "SPANQA_OUT")]
    out: PathBuf,
    /// Sequential gradients and wall_seconds = 0 for byte-identical reruns.
    #[arg(long, env = "SPANQA_SINGLE_THREAD")]
    single_thread: bool,
    /// Continue from the state saved in --out.
    #[arg(long, env = "SPANQA_RESUME")]
    resume: bool,
    /// Stop after this many steps.
    #[arg(long, env = "SPANQA_STOP_AFTER")]
    stop_after: Option<u64>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    head: HeadArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Defaults to best.shlb inside --out.
    #[arg(long, env = "SPANQA_CHECKPOINT")]
    checkpoint: Option<PathBuf>,
    /// Directory receiving predictions.json and null_odds.json.
    #[arg(long, env = "SPANQA_OUT")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long, env = "SPANQA_PREDICTIONS")]
    predictions: PathBuf,
    #[arg(long, env = "SPANQA_NULL_ODDS")]
    null_odds: PathBuf,
    #[arg(long, env = "SPANQA_SQUAD")]
    squad: PathBuf,
    /// Report JSON path.
    #[arg(long, env = "SPANQA_OUT")]
    out: Option<PathBuf>,
}

fn hidden_size(source: &EmbeddingSource) -> Result<usize> {
    Ok(match source {
        EmbeddingSource::Synthetic { hidden, .. } => *hidden,
        EmbeddingSource::File(p) => open_bemb(p)?.hidden(),
    })
}

fn head_config(args: &HeadArgs, embeddings: &EmbeddingSource) -> Result<HeadConfig> {
    let mut cfg = HeadConfig::new(args.head, hidden_size(embeddings)?);
    cfg.kernel_widths = args.kernel_widths.clone();
    cfg.filters_per_kernel = args.filters;
    cfg.lstm_hidden = args.lstm_hidden;
    cfg.context_out_channels = args.context_channels;
    cfg.dropout_keep_prob = args.dropout_keep;
    cfg.validate()?;
    Ok(cfg)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let head = head_config(&args.head, &args.data.embeddings)?;
    let mut cfg = RunConfig::new(head, args.data.squad, args.data.embeddings, args.out);
    cfg.max_seq_len = args.data.max_seq_len;
    cfg.max_answer_len = args.data.max_answer_len;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.adam.base_lr = args.lr;
    cfg.adam.warmup_fraction = args.warmup;
    cfg.adam.weight_decay = args.weight_decay;
    cfg.seed = args.seed;
    cfg.split_fraction = args.split_fraction;
    cfg.early_stop_patience = args.patience;
    cfg.single_thread = args.single_thread;
    cfg.resume = args.resume;
    cfg.stop_after = args.stop_after;
    if cfg.single_thread {
        rayon::ThreadPoolBuilder::new().num_threads(1).build_global().ok();
    }
    let out = trainer::train(&cfg)?;
    let last = out.rows.last();
    println!(
        "{}",
        json!({
            "status": "ok",
            "total_steps": out.total_steps,
            "eval_events": out.eval_events,
            "steps_done": out.steps_done,
            "stopped_early": out.stopped_early,
            "best_eval_loss": out.best_eval_loss,
            "last_eval_loss": last.map(|r| r.eval_loss),
            "last_eval_em": last.map(|r| r.eval_em),
            "last_eval_f1": last.map(|r| r.eval_f1),
            "out_dir": out.out_dir,
        })
    );
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let head = head_config(&args.head, &args.data.embeddings)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let cfg = PredictConfig {
        head,
        checkpoint: args.checkpoint.unwrap_or_else(|| args.out.join(BEST_CHECKPOINT)),
        squad: args.data.squad,
        embeddings: args.data.embeddings,
        max_seq_len: args.data.max_seq_len,
        max_answer_len: args.data.max_answer_len,
        predictions_out: args.out.join("predictions.json"),
        null_odds_out: args.out.join("null_odds.json"),
    };
    let preds = trainer::predict(&cfg)?;
    println!(
        "{}",
        json!({
            "status": "ok",
            "predictions": preds.len(),
            "predictions_file": cfg.predictions_out,
            "null_odds_file": cfg.null_odds_out,
        })
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let out = trainer::evaluate(&args.predictions, &args.null_odds, &args.squad, args.out.as_deref())?;
    println!("{}", out.thresholded);
    println!("unthresholded overall EM {:.2} F1 {:.2}", out.unthresholded.overall_em, out.unthresholded.overall_f1);
    Ok(())
}

fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .downcast_ref::<spanqa_core::Error>()
        .map_or("error", spanqa_core::Error::kind);
    json!({"status": "error", "kind": kind, "message": format!("{err:#}")}).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            e.print().ok();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"status": "error", "kind": "usage", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Predict(a) => run_predict(a),
        Command::Evaluate(a) => run_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}

