//! `finchat`: every pipeline stage behind one command.

mod cmd;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, Parser, Subcommand};
use finchat_core::harness::AblationSetting;
use finchat_core::Setting;

use crate::config::RunConfig;
use crate::failure::{classify, BAD_FLAG, USAGE};
use crate::output::Style;

#[derive(Debug, Parser)]
#[command(name = "finchat", version, about = "Polite, knowledge-grounded financial dialogue toolkit")]
#[command(arg_required_else_help = true, propagate_version = true)]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dialogue corpus tools.
    #[command(subcommand, arg_required_else_help = true)]
    Corpus(CorpusCmd),
    /// Commonsense triples and the retrieval index.
    #[command(subcommand, arg_required_else_help = true)]
    Knowledge(KnowledgeCmd),
    /// Language-model training and sampling.
    #[command(subcommand, arg_required_else_help = true)]
    Lm(LmCmd),
    /// Fine-tuning, preference construction and preference optimization.
    #[command(subcommand, arg_required_else_help = true)]
    Train(TrainCmd),
    /// Politeness classifier.
    #[command(subcommand, arg_required_else_help = true)]
    Politeness(PolitenessCmd),
    /// Reference-based metrics.
    #[command(subcommand, arg_required_else_help = true)]
    Metrics(MetricsCmd),
    /// Experiments.
    #[command(subcommand, arg_required_else_help = true)]
    Eval(EvalCmd),
    /// Interactive chat with a trained checkpoint.
    Chat(ChatArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    /// Report every schema or invariant violation.
    Validate { file: PathBuf },
    /// Corpus statistics.
    Stats {
        file: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Synthesize a corpus.
    Synth {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Probability that a turn is grounded in a knowledge fact.
        #[arg(long)]
        grounding: Option<f64>,
        #[arg(long, default_value = "corpus.jsonl")]
        out: PathBuf,
    },
    /// Seeded train/dev/test split into `<out>/{train,dev,test}.jsonl`.
    Split {
        file: PathBuf,
        #[arg(long)]
        train: f64,
        #[arg(long)]
        dev: f64,
        #[arg(long)]
        test: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "split")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum KnowledgeCmd {
    /// Build a retrieval index from a triple file (or the built-in bank).
    Build {
        #[arg(long, required_unless_present = "bank")]
        triples: Option<PathBuf>,
        /// Use the built-in financial fact bank.
        #[arg(long, conflicts_with = "triples")]
        bank: bool,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value = "index.json")]
        out: PathBuf,
    },
    /// Write the built-in financial fact bank as a triple file.
    Bank {
        #[arg(long, default_value = "triples.tsv")]
        out: PathBuf,
    },
    /// Retrieve facts for a query.
    Query {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        text: String,
        #[arg(long)]
        k: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct SftArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "wc")]
    pub setting: Setting,
    /// Required for the context setting.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value = "sft")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Deterministic argmax decoding.
    #[arg(long)]
    pub greedy: bool,
}

#[derive(Debug, Subcommand)]
pub enum LmCmd {
    /// Fine-tune a fresh model (same as `train sft`).
    TrainSft(SftArgs),
    /// Sample a continuation of a raw prompt.
    Sample {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        prompt: String,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrainCmd {
    /// Supervised fine-tuning of a fresh model.
    Sft(SftArgs),
    /// Build the preference set from polite dialogues.
    Prefs {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "wc")]
        setting: Setting,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "prefs.jsonl")]
        out: PathBuf,
    },
    /// Preference optimization on top of a fine-tuned checkpoint.
    Dpo {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        prefs: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        /// Score margins against the frozen starting checkpoint.
        #[arg(long)]
        reference: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, default_value = "dpo")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum PolitenessCmd {
    /// Train on the bot turns of a corpus, labelled by dialogue politeness.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "politeness")]
        out: PathBuf,
    },
    /// Classify one response per line.
    Score {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Also write per-line verdicts as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Score line-aligned hypothesis and reference files.
    Score {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref", value_name = "FILE")]
        reference: PathBuf,
        /// Adds the politeness column.
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Directory for `report.json` and `report.md`.
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// The four-setting ablation.
    Ablation {
        /// Directory with `train.jsonl` and `test.jsonl`.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run only these settings (default: all four).
        #[arg(long, value_delimiter = ',')]
        settings: Vec<AblationSetting>,
        #[arg(long)]
        max_samples: Option<usize>,
        #[arg(long, default_value = "ablation")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, default_value = "wc")]
    pub setting: Setting,
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Also write the session to this file.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

/// The error chain joined with `: `, skipping causes a wrapper already
/// spells out in its own message.
fn chain_message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.is_empty() {
            out = text;
        } else if !out.contains(&text) {
            out = format!("{out}: {text}");
        }
    }
    out
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn report(code: u8, kind: &str, message: &str) -> ExitCode {
    let style = Style::stderr();
    eprintln!("{} kind={kind} code={code}: {}", style.red("error"), one_line(message));
    ExitCode::from(code)
}

fn clap_failure(err: clap::Error) -> ExitCode {
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = err.print();
            ExitCode::SUCCESS
        }
        ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
            let _ = err.print();
            ExitCode::from(USAGE)
        }
        ErrorKind::InvalidSubcommand => {
            let name = match err.get(ContextKind::InvalidSubcommand) {
                Some(ContextValue::String(s)) => s.clone(),
                _ => String::new(),
            };
            eprintln!("{}", Cli::command_usage());
            report(USAGE, "usage", &format!("unknown command {name:?}"))
        }
        _ => {
            let flag = match err.get(ContextKind::InvalidArg) {
                Some(ContextValue::String(s)) => s.clone(),
                Some(ContextValue::Strings(v)) => v.join(", "),
                _ => String::new(),
            };
            let first = err.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            let message = if flag.is_empty() || first.contains(&flag) { first } else { format!("{flag}: {first}") };
            report(BAD_FLAG, "bad_flag", &message)
        }
    }
}

impl Cli {
    fn command_usage() -> String {
        use clap::CommandFactory;
        Cli::command().render_usage().to_string()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => return clap_failure(err),
    };
    let result = RunConfig::load(cli.config.as_deref()).and_then(|config| cmd::dispatch(cli.command, config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            report(code, kind, &chain_message(&err))
        }
    }
}
