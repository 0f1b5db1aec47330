//! Pretrains on a planted-partition graph and reports link prediction and
//! linear-probe accuracy.
//!
//! cargo run --release -p maskgae --example synthetic_run -- [n_nodes] [seed]

use maskgae::evaluation::{build_probe_embeddings, eval_link_prediction, linear_probe, random_node_split, ProbeConfig};
use maskgae::graph::split_edges;
use maskgae::masking::MaskingStrategy;
use maskgae::synthetic::PlantedPartition;
use maskgae::trainer::{pretrain, TrainConfig, Validation};

fn main() -> maskgae::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let g = PlantedPartition::citation_like(n).generate(seed)?;
    let split = split_edges(&g, 0.05, 0.10, seed)?;
    let x = g.features().expect("generated with features");
    for strategy in [MaskingStrategy::DEFAULT_EDGE, MaskingStrategy::DEFAULT_PATH] {
        let cfg = TrainConfig { strategy, seed, ..TrainConfig::default() };
        let t = std::time::Instant::now();
        let val = Validation { pos: &split.val_pos, neg: &split.val_neg };
        let (params, state) = pretrain(&split.train_graph, x, Some(val), &cfg)?;
        let lp = eval_link_prediction(&params, &split.train_graph, x, &split.test_pos, &split.test_neg)?;
        let emb = build_probe_embeddings(&params, &split.train_graph, x)?;
        let labels = g.labels().expect("generated with labels");
        let rest = n.saturating_sub(20 * 7);
        let ns = random_node_split(labels, 20, (rest / 3).min(500), (2 * rest / 3).min(1000), seed)?;
        let nc = linear_probe(&emb, labels, &ProbeConfig::new(ns), seed)?;
        println!(
            "{}: epochs={} best={} auc={:.4} ap={:.4} acc={:.4} ({:.1}s)",
            strategy.name(),
            state.epoch,
            state.best_epoch,
            lp.metrics["auc"],
            lp.metrics["ap"],
            nc.metrics["test_acc"],
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
