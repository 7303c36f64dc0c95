//! Command-line front end.
//!
//! Settings resolve in three layers: built-in defaults, then the
//! `--config` file, then flags (`--set key=value` first, then the dedicated
//! flags of the subcommand). Exit codes: 0 success, 2 usage, 3 data, 4
//! transport.

mod commands;
pub mod config;
mod log;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{Layout, SYNTH_SUMMARY_FILE};
pub use config::{derive_seed, RunConfig, KEYS, STAGES};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("transport: {0}")]
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Transport(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "exitlens", version, about = "Startup exit prediction pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Root seed; every stage seed derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    reference_date: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with a known success mechanism.
    Synth {
        #[arg(long)]
        n: Option<usize>,
        /// deterministic-threshold or logistic-sampling.
        #[arg(long)]
        mode: Option<String>,
        /// JSON generator config; flags still override it.
        #[arg(long, value_name = "FILE")]
        synth_config: Option<PathBuf>,
        /// Write here instead of the data directory.
        #[arg(long, value_name = "DIR")]
        dest: Option<PathBuf>,
    },
    /// Load the six CSV tables, check integrity and normalise headers.
    Ingest {
        #[arg(long, value_name = "FILE")]
        mapping: Option<PathBuf>,
        /// Fail on the first bad row.
        #[arg(long)]
        strict: bool,
    },
    /// Derive per-company profiles and labels.
    Features {
        /// Executive title keywords, one per line.
        #[arg(long, value_name = "FILE")]
        titles: Option<PathBuf>,
    },
    /// Corpus statistics over the profiles.
    Stats,
    /// Balance the classes and split train/val/test.
    Split {
        #[arg(long)]
        train: Option<f64>,
        #[arg(long)]
        val: Option<f64>,
        #[arg(long)]
        test: Option<f64>,
        #[arg(long)]
        no_balance: bool,
        #[arg(long)]
        no_stratify: bool,
    },
    /// Compile chat prompt datasets and the training manifest.
    Prompts {
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        /// Few-shot subset sizes, comma separated.
        #[arg(long, value_name = "K[,K...]")]
        fewshot_k: Option<String>,
        #[arg(long)]
        no_description: bool,
        #[arg(long)]
        no_leakage_guard: bool,
        /// Directory with v1.txt..v4.txt.
        #[arg(long, value_name = "DIR")]
        templates: Option<PathBuf>,
    },
    /// Fit the boosted-tree baseline and report on the test split.
    TrainBaseline {
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Query a chat-completions endpoint and write an audit log.
    EvalEndpoint {
        #[arg(long)]
        url: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        concurrency: Option<usize>,
        /// zero-shot or fewshot-<k>.
        #[arg(long)]
        regime: Option<String>,
        /// Prompt records to send (default: the test or all set).
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        #[arg(long)]
        retries: Option<u32>,
        #[arg(long)]
        timeout_secs: Option<u64>,
    },
    /// Re-score an audit log offline, optionally with BERTScore.
    Score {
        #[arg(long, value_name = "FILE")]
        audit: Option<PathBuf>,
        #[arg(long)]
        regime: Option<String>,
        /// JSONL fixture of {text, tokens, vectors}.
        #[arg(long, value_name = "FILE")]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        embeddings_url: Option<String>,
        #[arg(long)]
        idf: bool,
    },
}

fn flag_overrides(g: &GlobalArgs, cmd: &Command) -> Vec<(&'static str, String)> {
    let mut o: Vec<(&'static str, String)> = Vec::new();
    let mut put = |k: &'static str, v: Option<String>| {
        if let Some(v) = v {
            o.push((k, v));
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let on = |b: bool, v: &str| b.then(|| v.to_string());
    put("data_dir", path(&g.data_dir));
    put("out_dir", path(&g.out_dir));
    put("seed", g.seed.map(|s| s.to_string()));
    put("reference_date", g.reference_date.clone());
    match cmd {
        Command::Synth { n, mode, synth_config, .. } => {
            put("synth.n_companies", n.map(|n| n.to_string()));
            put("synth.mode", mode.clone());
            put("synth.config", path(synth_config));
        }
        Command::Ingest { mapping, strict } => {
            put("mapping", path(mapping));
            put("strict_ingest", on(*strict, "true"));
        }
        Command::Features { titles } => put("executive_titles", path(titles)),
        Command::Stats => {}
        Command::Split {
            train,
            val,
            test,
            no_balance,
            no_stratify,
        } => {
            put("split.train", train.map(|x| x.to_string()));
            put("split.val", val.map(|x| x.to_string()));
            put("split.test", test.map(|x| x.to_string()));
            put("split.balance", on(*no_balance, "false"));
            put("split.stratified", on(*no_stratify, "false"));
        }
        Command::Prompts {
            variant,
            budget,
            fewshot_k,
            no_description,
            no_leakage_guard,
            templates,
        } => {
            put("prompt.variant", variant.clone());
            put("prompt.budget", budget.map(|b| b.to_string()));
            put("prompt.fewshot_k", fewshot_k.clone());
            put("prompt.include_description", on(*no_description, "false"));
            put("prompt.leakage_guard", on(*no_leakage_guard, "false"));
            put("prompt.templates", path(templates));
        }
        Command::TrainBaseline {
            rounds,
            max_depth,
            learning_rate,
        } => {
            put("gbdt.n_rounds", rounds.map(|x| x.to_string()));
            put("gbdt.max_depth", max_depth.map(|x| x.to_string()));
            put("gbdt.learning_rate", learning_rate.map(|x| x.to_string()));
        }
        Command::EvalEndpoint {
            url,
            model,
            concurrency,
            regime,
            retries,
            timeout_secs,
            ..
        } => {
            put("endpoint.base_url", url.clone());
            put("endpoint.model", model.clone());
            put("endpoint.max_in_flight", concurrency.map(|x| x.to_string()));
            put("eval.regime", regime.clone());
            put("endpoint.max_retries", retries.map(|x| x.to_string()));
            put("endpoint.timeout_secs", timeout_secs.map(|x| x.to_string()));
        }
        Command::Score {
            regime,
            embeddings,
            embeddings_url,
            idf,
            ..
        } => {
            put("eval.regime", regime.clone());
            put("score.embeddings", path(embeddings));
            put("score.embeddings_url", embeddings_url.clone());
            put("score.idf", on(*idf, "true"));
        }
    }
    o
}

fn resolve(g: &GlobalArgs, cmd: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &g.config {
        cfg.apply_file(p)?;
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v)?;
    }
    for (k, v) in flag_overrides(g, cmd) {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cfg: &RunConfig, cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Synth { dest, .. } => commands::synth(cfg, dest.as_deref()),
        Command::Ingest { .. } => commands::ingest(cfg),
        Command::Features { .. } => commands::features(cfg),
        Command::Stats => commands::stats(cfg),
        Command::Split { .. } => commands::split_cmd(cfg),
        Command::Prompts { .. } => commands::prompts(cfg),
        Command::TrainBaseline { .. } => commands::train_baseline(cfg),
        Command::EvalEndpoint { input, .. } => commands::eval_endpoint(cfg, input.as_deref()),
        Command::Score { audit, .. } => commands::score(cfg, audit.as_deref()),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve(&cli.global, &cli.command).and_then(|cfg| dispatch(&cfg, &cli.command));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "level": "error", "event": "exit", "code": e.exit_code(), "message": e.to_string() }));
            e.exit_code()
        }
    }
}
