//! `maskgae` command-line interface.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;
use output::RunDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] maskgae::Error),

    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "maskgae", version, about = "Masked graph autoencoder pretraining and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split edges into train/validation/test sets.
    Split(RunArgs),
    /// Pretrain one model per seed on a split.
    Pretrain(RunArgs),
    /// Link prediction AUC/AP of pretrained checkpoints on the test edges.
    EvalLinkpred(RunArgs),
    /// Linear-probe node classification accuracy of pretrained checkpoints.
    EvalNodeclf(RunArgs),
    /// Neighbourhood overlap of positive pairs under masking regimes.
    OverlapStats(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Split(_) => "split",
            Command::Pretrain(_) => "pretrain",
            Command::EvalLinkpred(_) => "eval-linkpred",
            Command::EvalNodeclf(_) => "eval-nodeclf",
            Command::OverlapStats(_) => "overlap-stats",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Split(a)
            | Command::Pretrain(a)
            | Command::EvalLinkpred(a)
            | Command::EvalNodeclf(a)
            | Command::OverlapStats(a) => a,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: runs/<command>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Seeds run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Dataset name under $MASKGAE_DATA_DIR (`<name>/<name>.edges`, ...).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    edges: Option<String>,
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    node_split: Option<String>,
    /// Split file; `{seed}` is replaced by each seed.
    #[arg(long)]
    split: Option<String>,
    /// Checkpoint file; `{seed}` is replaced by each seed.
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    val_frac: Option<String>,
    #[arg(long)]
    test_frac: Option<String>,
    /// `edge` or `path`.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Overlap regimes: `none`, `edge`, `path` (comma separated) or `all`.
    #[arg(long)]
    regime: Option<String>,
    /// Hop counts for overlap statistics, comma separated.
    #[arg(long)]
    k: Option<String>,
    /// Any config key, as KEY=VALUE. Repeatable; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("dataset", &self.dataset),
            ("edges", &self.edges),
            ("features", &self.features),
            ("labels", &self.labels),
            ("node_split", &self.node_split),
            ("split", &self.split),
            ("checkpoint", &self.checkpoint),
            ("val_frac", &self.val_frac),
            ("test_frac", &self.test_frac),
            ("strategy", &self.strategy),
            ("epochs", &self.epochs),
            ("regime", &self.regime),
            ("k", &self.k),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let args = command.args();
    let cfg = args.run_config()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(command.name()));
    let mut dir = RunDir::create(&out, command.name(), &cfg, args.force)?;
    log::info!("{} -> {}", command.name(), dir.root().display());
    let result = match command {
        Command::Split(_) => commands::split(&cfg, &mut dir),
        Command::Pretrain(_) => commands::pretrain(&cfg, &mut dir, args.jobs),
        Command::EvalLinkpred(_) => commands::eval_linkpred(&cfg, &mut dir, args.jobs),
        Command::EvalNodeclf(_) => commands::eval_nodeclf(&cfg, &mut dir, args.jobs),
        Command::OverlapStats(_) => commands::overlap_stats(&cfg, &mut dir),
    };
    dir.finish(result.as_ref().err())?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
