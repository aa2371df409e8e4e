mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{PipelineConfig, ScorerKind};

/// Error caused by the invocation or its inputs (exit code 2).
#[derive(Debug)]
pub struct UserError(pub String);

impl fmt::Display for UserError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

#[derive(Debug, Parser)]
#[command(name = "itermem", version, about = "Iterative-memory open information extraction")]
pub struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-sentence work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pool extractor outputs per sentence and optionally draw a random bootstrap corpus.
    Ingest {
        #[arg(long)]
        sentences: Option<PathBuf>,
        /// `NAME=PATH`, highest rank first. Defaults to the configured sources.
        #[arg(long = "source", value_name = "NAME=PATH")]
        sources: Vec<String>,
        /// Treat this source's confidences as absent and use file order.
        #[arg(long = "no-confidence", value_name = "NAME")]
        no_confidence: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a per-sentence random-source bootstrap corpus here.
        #[arg(long)]
        bootstrap_out: Option<PathBuf>,
        /// Fail on any malformed extraction line.
        #[arg(long)]
        strict: bool,
    },
    /// Select a high-scoring, low-redundancy subset of every pool.
    ScoreFilter {
        #[arg(long)]
        sentences: Option<PathBuf>,
        #[arg(long)]
        pooled: PathBuf,
        #[arg(long, value_enum)]
        scorer: Option<ScorerKind>,
        /// Model checkpoint for `--scorer model`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Score TSV for `--scorer external`.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-sentence objective values as JSON lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Turn ordered extractions into iterative-memory training instances.
    BuildTrain {
        #[arg(long)]
        sentences: Option<PathBuf>,
        #[arg(long)]
        extractions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shuffle each sentence's extraction order (ordering ablation).
        #[arg(long)]
        shuffle_train_order: bool,
        #[arg(long)]
        max_input_len: Option<usize>,
    },
    /// Train the encoder-decoder on training instances.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long = "checkpoint-out")]
        checkpoint_out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        target_loss: Option<f64>,
        /// Per-epoch losses as CSV.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Extract tuples iteratively with a trained checkpoint.
    Decode {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        sentences: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Score predictions against gold tuples: optimal F1, AUC, last F1.
    Eval {
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        curve_out: Option<PathBuf>,
        #[arg(long)]
        svg_out: Option<PathBuf>,
    },
    /// Redundancy of predictions: mean occurrences per word and mean pairwise IOU.
    Redundancy {
        #[arg(long)]
        pred: PathBuf,
    },
    /// Write the precision-recall curve as CSV.
    PrCurve {
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg_out: Option<PathBuf>,
    },
    /// Decode one sentence and write the attention matrix of one extraction as CSV.
    ExportAttention {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        sentences: Option<PathBuf>,
        /// Sentence id.
        #[arg(long)]
        id: String,
        /// 1-based extraction number.
        #[arg(long, default_value_t = 1)]
        iteration: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus: sentences, gold tuples and three imitation extractors.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        sentences: usize,
        #[arg(long, default_value_t = 1)]
        min_tuples: usize,
        #[arg(long, default_value_t = 4)]
        max_tuples: usize,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use itermem::Error as E;
    for cause in err.chain() {
        if cause.is::<UserError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Diverged(_) | E::LabelingLength { .. } | E::TooManyVariables(..) | E::InvalidTerm(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(UserError("--jobs must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| anyhow::anyhow!("thread pool: {e}"))?;
    }
    commands::dispatch(cli.command, cfg)
}
