//! Flat `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use maskgae::masking::MaskingStrategy;
use maskgae::models::DecoderMode;
use maskgae::trainer::TrainConfig;

use crate::CliError;

pub const DATA_DIR_ENV: &str = "MASKGAE_DATA_DIR";

/// Masking regimes accepted by `overlap-stats`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegimeChoice {
    None,
    Edge,
    Path,
}

impl FromStr for RegimeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "edge" => Ok(Self::Edge),
            "path" => Ok(Self::Path),
            _ => Err(format!("unknown regime {s:?} (expected none, edge or path)")),
        }
    }
}

impl fmt::Display for RegimeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Edge => "edge",
            Self::Path => "path",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    Edge,
    Path,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<String>,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub node_split: Option<PathBuf>,
    /// Split file path; `{seed}` is replaced per seed.
    pub split: Option<String>,
    /// Checkpoint path; `{seed}` is replaced per seed.
    pub checkpoint: Option<String>,
    pub val_frac: f64,
    pub test_frac: f64,
    pub strategy: StrategyKind,
    pub p: f64,
    pub root_fraction: f64,
    pub n_walk: usize,
    pub l_walk: usize,
    pub train: TrainConfig,
    pub probe_lr: f64,
    pub probe_epochs: usize,
    pub probe_weight_decay: f64,
    pub probe_standardize: bool,
    pub probe_per_class: usize,
    pub probe_val: usize,
    pub probe_test: usize,
    pub k: Vec<usize>,
    pub regimes: Vec<RegimeChoice>,
    pub overlap_seeds: usize,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let (root_fraction, n_walk, l_walk) = match MaskingStrategy::DEFAULT_PATH {
            MaskingStrategy::Path {
                root_fraction,
                n_walk,
                l_walk,
            } => (root_fraction, n_walk, l_walk),
            MaskingStrategy::Edge { .. } => unreachable!("default path strategy"),
        };
        let p = match MaskingStrategy::DEFAULT_EDGE {
            MaskingStrategy::Edge { p } => p,
            MaskingStrategy::Path { .. } => unreachable!("default edge strategy"),
        };
        Self {
            dataset: None,
            edges: None,
            features: None,
            labels: None,
            node_split: None,
            split: None,
            checkpoint: None,
            val_frac: 0.05,
            test_frac: 0.10,
            strategy: StrategyKind::Path,
            p,
            root_fraction,
            n_walk,
            l_walk,
            train,
            probe_lr: 0.01,
            probe_epochs: 300,
            probe_weight_decay: 1e-5,
            probe_standardize: false,
            probe_per_class: 20,
            probe_val: 500,
            probe_test: 1000,
            k: vec![2],
            regimes: vec![RegimeChoice::None, RegimeChoice::Edge, RegimeChoice::Path],
            overlap_seeds: 10,
            seeds: vec![0],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key} needs at least one value")));
    }
    Ok(items)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Applies one `key = value` setting. An empty value clears an optional path.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        let text = || (!value.is_empty()).then(|| value.to_string());
        match key {
            "dataset" => self.dataset = text(),
            "edges" => self.edges = path(),
            "features" => self.features = path(),
            "labels" => self.labels = path(),
            "node_split" => self.node_split = path(),
            "split" => self.split = text(),
            "checkpoint" => self.checkpoint = text(),
            "val_frac" => self.val_frac = parse(key, value)?,
            "test_frac" => self.test_frac = parse(key, value)?,
            "strategy" => {
                self.strategy = match value {
                    "edge" => StrategyKind::Edge,
                    "path" => StrategyKind::Path,
                    _ => return Err(CliError::Config(format!("strategy must be edge or path, got {value:?}"))),
                }
            }
            "p" => self.p = parse(key, value)?,
            "root_fraction" => self.root_fraction = parse(key, value)?,
            "n_walk" => self.n_walk = parse(key, value)?,
            "l_walk" => self.l_walk = parse(key, value)?,
            "n_layers" => self.train.encoder.n_layers = parse(key, value)?,
            "hidden_dim" => self.train.encoder.hidden_dim = parse(key, value)?,
            "batchnorm" => self.train.encoder.use_batchnorm = parse(key, value)?,
            "dropout" => self.train.encoder.dropout = parse(key, value)?,
            "decoder" => self.train.decoder = parse::<DecoderMode>(key, value)?,
            "alpha" => self.train.alpha = parse(key, value)?,
            "lr" => self.train.lr = parse(key, value)?,
            "epochs" => self.train.max_epochs = parse(key, value)?,
            "patience" => self.train.patience = parse(key, value)?,
            "probe_lr" => self.probe_lr = parse(key, value)?,
            "probe_epochs" => self.probe_epochs = parse(key, value)?,
            "probe_weight_decay" => self.probe_weight_decay = parse(key, value)?,
            "probe_standardize" => self.probe_standardize = parse(key, value)?,
            "probe_per_class" => self.probe_per_class = parse(key, value)?,
            "probe_val" => self.probe_val = parse(key, value)?,
            "probe_test" => self.probe_test = parse(key, value)?,
            "k" => self.k = parse_list(key, value)?,
            "regime" => {
                self.regimes = if value == "all" {
                    Self::default().regimes
                } else {
                    parse_list(key, value)?
                }
            }
            "overlap_seeds" => self.overlap_seeds = parse(key, value)?,
            "seed" => self.seeds = parse_list(key, value)?,
            _ => return Err(CliError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected `key = value`", path.display(), i + 1))
            })?;
            self.set(key.trim(), value).map_err(|e| {
                CliError::Config(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
        }
        Ok(())
    }

    pub fn masking(&self) -> MaskingStrategy {
        match self.strategy {
            StrategyKind::Edge => MaskingStrategy::Edge { p: self.p },
            StrategyKind::Path => MaskingStrategy::Path {
                root_fraction: self.root_fraction,
                n_walk: self.n_walk,
                l_walk: self.l_walk,
            },
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            strategy: self.masking(),
            seed,
            ..self.train
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seed list is empty".into()));
        }
        self.train_config(0).validate()?;
        if self.k.contains(&0) {
            return Err(CliError::Config("k must be >= 1".into()));
        }
        if self.overlap_seeds == 0 {
            return Err(CliError::Config("overlap_seeds must be >= 1".into()));
        }
        Ok(())
    }

    /// Dataset file for `slot` (`edges`, `features`, `labels`, `node_split`):
    /// the explicit key if set, else derived from `dataset`. Relative paths
    /// are taken under `$MASKGAE_DATA_DIR` when it is set.
    pub fn data_path(&self, slot: &str) -> Option<PathBuf> {
        let explicit = match slot {
            "edges" => &self.edges,
            "features" => &self.features,
            "labels" => &self.labels,
            "node_split" => &self.node_split,
            _ => return None,
        };
        let rel = match (explicit, &self.dataset) {
            (Some(p), _) => p.clone(),
            (None, Some(name)) => {
                let ext = if slot == "node_split" { "split.json" } else { slot };
                PathBuf::from(name).join(format!("{name}.{ext}"))
            }
            (None, None) => return None,
        };
        Some(match std::env::var_os(DATA_DIR_ENV) {
            Some(base) if rel.is_relative() => PathBuf::from(base).join(rel),
            _ => rel,
        })
    }

    /// Every key with its effective value, for the run manifest.
    pub fn effective(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        vec![
            ("dataset", self.dataset.clone().unwrap_or_default()),
            ("edges", opt_path(&self.data_path("edges"))),
            ("features", opt_path(&self.data_path("features"))),
            ("labels", opt_path(&self.data_path("labels"))),
            ("node_split", opt_path(&self.data_path("node_split"))),
            ("split", self.split.clone().unwrap_or_default()),
            ("checkpoint", self.checkpoint.clone().unwrap_or_default()),
            ("val_frac", self.val_frac.to_string()),
            ("test_frac", self.test_frac.to_string()),
            ("strategy", self.masking().name().to_string()),
            ("p", self.p.to_string()),
            ("root_fraction", self.root_fraction.to_string()),
            ("n_walk", self.n_walk.to_string()),
            ("l_walk", self.l_walk.to_string()),
            ("n_layers", t.encoder.n_layers.to_string()),
            ("hidden_dim", t.encoder.hidden_dim.to_string()),
            ("batchnorm", t.encoder.use_batchnorm.to_string()),
            ("dropout", t.encoder.dropout.to_string()),
            ("decoder", t.decoder.to_string()),
            ("alpha", t.alpha.to_string()),
            ("lr", t.lr.to_string()),
            ("epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("probe_lr", self.probe_lr.to_string()),
            ("probe_epochs", self.probe_epochs.to_string()),
            ("probe_weight_decay", self.probe_weight_decay.to_string()),
            ("probe_standardize", self.probe_standardize.to_string()),
            ("probe_per_class", self.probe_per_class.to_string()),
            ("probe_val", self.probe_val.to_string()),
            ("probe_test", self.probe_test.to_string()),
            ("k", join(&self.k)),
            ("regime", join(&self.regimes)),
            ("overlap_seeds", self.overlap_seeds.to_string()),
            ("seed", join(&self.seeds)),
        ]
    }
}

/// Replaces `{seed}` in a path template.
pub fn for_seed(template: &str, seed: u64) -> PathBuf {
    PathBuf::from(template.replace("{seed}", &seed.to_string()))
}
