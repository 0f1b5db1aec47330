//! Subcommand implementations.

use std::path::PathBuf;

use log::info;
use maskgae::analysis::{masked_overlap_sweep, overlap_csv, OverlapRegime};
use maskgae::evaluation::{
    aggregate, build_probe_embeddings, eval_link_prediction, linear_probe, random_node_split,
    MetricsReport, NodeSplit, ProbeConfig,
};
use maskgae::graph::{load_graph, split_edges, Graph};
use maskgae::masking::MaskingStrategy;
use maskgae::models::ModelParams;
use maskgae::numcore::{checkpoint_digest, encode_checkpoint, read_checkpoint, DenseMatrix};
use maskgae::trainer::{pretrain_with, TrainState, Validation};
use maskgae::EdgeSplit;
use rayon::prelude::*;

use crate::config::{for_seed, RegimeChoice, RunConfig};
use crate::output::RunDir;
use crate::CliError;

fn require(cfg: &RunConfig, slot: &str, why: &str) -> Result<PathBuf, CliError> {
    let path = cfg
        .data_path(slot)
        .ok_or_else(|| CliError::Config(format!("{why} needs `{slot}` (or `dataset`)")))?;
    if !path.exists() {
        return Err(CliError::Config(format!("{slot} file not found: {}", path.display())));
    }
    Ok(path)
}

fn optional(cfg: &RunConfig, slot: &str) -> Result<Option<PathBuf>, CliError> {
    match cfg.data_path(slot) {
        Some(p) if p.exists() => Ok(Some(p)),
        // a dataset name only implies optional files; explicit paths must exist
        Some(p) if cfg.dataset.is_some() && !explicitly_set(cfg, slot) => {
            log::debug!("no {slot} file at {}", p.display());
            Ok(None)
        }
        Some(p) => Err(CliError::Config(format!("{slot} file not found: {}", p.display()))),
        None => Ok(None),
    }
}

fn explicitly_set(cfg: &RunConfig, slot: &str) -> bool {
    match slot {
        "features" => cfg.features.is_some(),
        "labels" => cfg.labels.is_some(),
        "node_split" => cfg.node_split.is_some(),
        _ => true,
    }
}

fn load_dataset(cfg: &RunConfig, why: &str, need_features: bool, need_labels: bool) -> Result<Graph, CliError> {
    let edges = require(cfg, "edges", why)?;
    let features = if need_features {
        Some(require(cfg, "features", why)?)
    } else {
        optional(cfg, "features")?
    };
    let labels = if need_labels {
        Some(require(cfg, "labels", why)?)
    } else {
        optional(cfg, "labels")?
    };
    let g = load_graph(&edges, features.as_deref(), labels.as_deref())?;
    info!(
        "loaded {} nodes, {} edges from {}",
        g.n_nodes(),
        g.n_edges(),
        edges.display()
    );
    Ok(g)
}

fn template<'a>(value: &'a Option<String>, key: &str, why: &str) -> Result<&'a str, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("{why} needs `{key}` (a path, may contain {{seed}})")))
}

fn load_split(tpl: &str, seed: u64, g: &Graph) -> Result<EdgeSplit, CliError> {
    let path = for_seed(tpl, seed);
    if !path.exists() {
        return Err(CliError::Config(format!("split file not found: {}", path.display())));
    }
    Ok(EdgeSplit::load(&path, Some(g))?)
}

fn load_params(tpl: &str, seed: u64) -> Result<(ModelParams, String), CliError> {
    let path = for_seed(tpl, seed);
    if !path.exists() {
        return Err(CliError::Config(format!("checkpoint not found: {}", path.display())));
    }
    let tensors = read_checkpoint(&path)?;
    let digest = checkpoint_digest(&tensors);
    Ok((ModelParams::from_named(&tensors)?, digest))
}

fn features(g: &Graph) -> &DenseMatrix<f32> {
    g.features().expect("features were required when loading")
}

/// Runs `job` for every seed, in parallel when `jobs > 1`, keeping seed order.
fn per_seed<T: Send>(
    seeds: &[u64],
    jobs: usize,
    job: impl Fn(u64) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    if jobs <= 1 || seeds.len() <= 1 {
        return seeds.iter().map(|&s| job(s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| job(s)).collect())
}

fn seed_dir(seed: u64) -> PathBuf {
    PathBuf::from(format!("seed{seed}"))
}

fn write_reports(run: &mut RunDir, reports: &[MetricsReport]) -> Result<(), CliError> {
    for r in reports {
        let seed = r.seed.expect("per-seed report");
        run.write(seed_dir(seed).join("metrics.json"), r.to_json() + "\n")?;
    }
    let summary = aggregate(reports)?;
    for (name, mean) in &summary.mean {
        info!("{}: {name} = {mean:.4} +- {:.4} over {} runs", summary.task, summary.std[name], summary.n_runs);
    }
    run.write("summary.json", summary.to_json() + "\n")?;
    Ok(())
}

pub fn split(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let g = load_dataset(cfg, "split", false, false)?;
    for &seed in &cfg.seeds {
        let s = split_edges(&g, cfg.val_frac, cfg.test_frac, seed)?;
        info!(
            "seed {seed}: {} train, {} val, {} test edges",
            s.train_graph.n_edges(),
            s.val_pos.len(),
            s.test_pos.len()
        );
        run.write(format!("split_seed{seed}.json"), s.to_json() + "\n")?;
    }
    Ok(())
}

pub fn pretrain(cfg: &RunConfig, run: &mut RunDir, jobs: usize) -> Result<(), CliError> {
    let g = load_dataset(cfg, "pretrain", true, false)?;
    let tpl = template(&cfg.split, "split", "pretrain")?;
    let results = per_seed(&cfg.seeds, jobs, |seed| {
        let split = load_split(tpl, seed, &g)?;
        let val = Validation {
            pos: &split.val_pos,
            neg: &split.val_neg,
        };
        let mut log = String::new();
        let (params, state) = pretrain_with(&split.train_graph, features(&g), Some(val), &cfg.train_config(seed), |r| {
            let line = r.log_line();
            log::debug!("seed {seed} {line}");
            log.push_str(&line);
            log.push('\n');
        })?;
        info!(
            "seed {seed}: {} epochs, best epoch {} (val auc {})",
            state.epoch,
            state.best_epoch,
            state.best_val_auc.map_or("n/a".into(), |a| format!("{a:.4}"))
        );
        Ok((seed, params, state, log))
    })?;
    for (seed, params, state, log) in results {
        let dir = seed_dir(seed);
        run.write(dir.join("model.ckpt"), encode_checkpoint(&params.to_named()))?;
        run.write(dir.join("train.log"), log)?;
        run.write(dir.join("train_state.json"), state_json(&state) + "\n")?;
    }
    Ok(())
}

fn state_json(state: &TrainState) -> String {
    serde_json::to_string_pretty(state).expect("train state serializes")
}

pub fn eval_linkpred(cfg: &RunConfig, run: &mut RunDir, jobs: usize) -> Result<(), CliError> {
    let g = load_dataset(cfg, "eval-linkpred", true, false)?;
    let split_tpl = template(&cfg.split, "split", "eval-linkpred")?;
    let ckpt_tpl = template(&cfg.checkpoint, "checkpoint", "eval-linkpred")?;
    let reports = per_seed(&cfg.seeds, jobs, |seed| {
        let split = load_split(split_tpl, seed, &g)?;
        let (params, digest) = load_params(ckpt_tpl, seed)?;
        let mut r = eval_link_prediction(&params, &split.train_graph, features(&g), &split.test_pos, &split.test_neg)?;
        r.seed = Some(seed);
        r.config_digest = Some(digest);
        Ok(r)
    })?;
    write_reports(run, &reports)
}

pub fn eval_nodeclf(cfg: &RunConfig, run: &mut RunDir, jobs: usize) -> Result<(), CliError> {
    let g = load_dataset(cfg, "eval-nodeclf", true, true)?;
    let labels = g.labels().expect("labels were required when loading");
    let ckpt_tpl = template(&cfg.checkpoint, "checkpoint", "eval-nodeclf")?;
    let fixed_split = optional(cfg, "node_split")?
        .map(|p| NodeSplit::load(&p))
        .transpose()?;
    let reports = per_seed(&cfg.seeds, jobs, |seed| {
        let (params, digest) = load_params(ckpt_tpl, seed)?;
        let graph = match &cfg.split {
            Some(tpl) => load_split(tpl, seed, &g)?.train_graph,
            None => g.clone(),
        };
        let nodes = match &fixed_split {
            Some(s) => s.clone(),
            None => random_node_split(labels, cfg.probe_per_class, cfg.probe_val, cfg.probe_test, seed)?,
        };
        let probe = ProbeConfig {
            lr: cfg.probe_lr,
            epochs: cfg.probe_epochs,
            weight_decay: cfg.probe_weight_decay,
            standardize: cfg.probe_standardize,
            split: nodes,
        };
        let emb = build_probe_embeddings(&params, &graph, features(&g))?;
        let mut r = linear_probe(&emb, labels, &probe, seed)?;
        r.seed = Some(seed);
        r.config_digest = Some(digest);
        Ok(r)
    })?;
    write_reports(run, &reports)
}

pub fn overlap_stats(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let g = load_dataset(cfg, "overlap-stats", false, false)?;
    let regimes: Vec<OverlapRegime> = cfg
        .regimes
        .iter()
        .map(|r| match r {
            RegimeChoice::None => OverlapRegime::NoMask,
            RegimeChoice::Edge => OverlapRegime::Masked(MaskingStrategy::Edge { p: cfg.p }),
            RegimeChoice::Path => OverlapRegime::Masked(MaskingStrategy::Path {
                root_fraction: cfg.root_fraction,
                n_walk: cfg.n_walk,
                l_walk: cfg.l_walk,
            }),
        })
        .collect();
    let base_seed = cfg.seeds[0];
    if cfg.seeds.len() > 1 {
        log::warn!("overlap-stats averages over overlap_seeds masks from the first seed ({base_seed}) only");
    }
    let mut reports = Vec::new();
    for &k in &cfg.k {
        for r in masked_overlap_sweep(&g, k, &regimes, cfg.overlap_seeds, base_seed)? {
            info!("k={k} {}: o_node={:.4} o_edge={:.4}", r.regime.name(), r.o_node, r.o_edge);
            reports.push(r);
        }
    }
    run.write("overlap.csv", overlap_csv(&reports))?;
    run.write(
        "overlap.json",
        serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n",
    )?;
    Ok(())
}

