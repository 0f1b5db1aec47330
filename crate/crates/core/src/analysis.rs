//! Overlap between the k-hop neighbourhoods of linked node pairs, and the
//! redundancy lower bound built from it.
//!
//! For a pair `(u, v)` with k-hop node sets `V(u)`, `V(v)` and induced edge
//! sets `E(u)`, `E(v)`, the node overlap is
//! `(|V(u) & V(v)| / |V(u)| + |V(u) & V(v)| / |V(v)|) / 2`, and the edge overlap
//! is the same with edge sets (a ratio with an empty denominator counts 0).
//! Since both edge sets are induced, `E(u) & E(v)` is exactly the edge set
//! induced on `V(u) & V(v)`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, KHopScratch};
use crate::masking::MaskingStrategy;
use crate::rng::derive_seed;

/// Which positive pairs and which graph an overlap figure was measured on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// All edges of the full graph.
    None,
    /// Masked edges of an edge-wise mask, neighbourhoods in the visible graph.
    Edge,
    /// Masked edges of a path-wise mask, neighbourhoods in the visible graph.
    Path,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::None => "none",
            Regime::Edge => "edge",
            Regime::Path => "path",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub k: usize,
    pub regime: Regime,
    pub o_node: f64,
    pub o_edge: f64,
    /// Positive pairs averaged over, summed across seeds.
    pub n_pairs: usize,
    pub n_seeds: usize,
}

struct Neighbourhood {
    nodes: Vec<usize>,
    n_edges: usize,
}

fn induced_edge_count(g: &Graph, nodes: &[usize], member: impl Fn(usize) -> bool) -> usize {
    nodes
        .iter()
        .map(|&a| g.neighbors(a).iter().filter(|&&b| a < b && member(b)).count())
        .sum()
}

fn neighbourhoods(g: &Graph, centers: &[usize], k: usize) -> Vec<Neighbourhood> {
    centers
        .par_iter()
        .map_init(
            || KHopScratch::new(g.n_nodes()),
            |scratch, &c| {
                let mut nodes = scratch.nodes(g, c, k).to_vec();
                nodes.sort_unstable();
                let n_edges = induced_edge_count(g, &nodes, |x| scratch.contains(x));
                Neighbourhood { nodes, n_edges }
            },
        )
        .collect()
}

fn intersect_sorted(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

struct PairOverlap {
    o_node: f64,
    o_edge: f64,
    n_shared: usize,
}

/// Per-pair overlap figures, in input order.
fn pair_overlaps(g: &Graph, pairs: &[Edge], k: usize) -> Result<Vec<PairOverlap>> {
    for &(u, v) in pairs {
        g.check_node(u)?;
        g.check_node(v)?;
    }
    let mut centers: Vec<usize> = pairs.iter().flat_map(|&(u, v)| [u, v]).collect();
    centers.sort_unstable();
    centers.dedup();
    let hoods = neighbourhoods(g, &centers, k);
    let slot = |v: usize| centers.binary_search(&v).expect("center listed");
    Ok(pairs
        .par_iter()
        .map_init(
            || (vec![false; g.n_nodes()], Vec::new()),
            |(mark, shared), &(u, v)| {
                let (hu, hv) = (&hoods[slot(u)], &hoods[slot(v)]);
                intersect_sorted(&hu.nodes, &hv.nodes, shared);
                for &x in shared.iter() {
                    mark[x] = true;
                }
                let shared_edges = induced_edge_count(g, shared, |x| mark[x]);
                for &x in shared.iter() {
                    mark[x] = false;
                }
                let s = shared.len();
                PairOverlap {
                    o_node: 0.5 * (ratio(s, hu.nodes.len()) + ratio(s, hv.nodes.len())),
                    o_edge: 0.5 * (ratio(shared_edges, hu.n_edges) + ratio(shared_edges, hv.n_edges)),
                    n_shared: s,
                }
            },
        )
        .collect())
}

/// Mean node and edge overlap of the k-hop neighbourhoods (taken in `g`) of
/// each pair in `positive_edges`. Reported under [`Regime::None`]; callers
/// measuring a masked regime relabel it.
pub fn overlap_stats(g: &Graph, positive_edges: &[Edge], k: usize) -> Result<OverlapReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if positive_edges.is_empty() {
        return Err(Error::NothingToReconstruct("no positive pairs for overlap".into()));
    }
    let per_pair = pair_overlaps(g, positive_edges, k)?;
    let n = per_pair.len() as f64;
    // Sequential sums keep the result independent of the thread schedule.
    let o_node = per_pair.iter().map(|p| p.o_node).sum::<f64>() / n;
    let o_edge = per_pair.iter().map(|p| p.o_edge).sum::<f64>() / n;
    Ok(OverlapReport {
        k,
        regime: Regime::None,
        o_node,
        o_edge,
        n_pairs: per_pair.len(),
        n_seeds: 1,
    })
}

/// A measurement setting for [`masked_overlap_sweep`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OverlapRegime {
    NoMask,
    Masked(MaskingStrategy),
}

impl OverlapRegime {
    pub fn regime(&self) -> Regime {
        match self {
            OverlapRegime::NoMask => Regime::None,
            OverlapRegime::Masked(MaskingStrategy::Edge { .. }) => Regime::Edge,
            OverlapRegime::Masked(MaskingStrategy::Path { .. }) => Regime::Path,
        }
    }
}

/// Overlap per regime, averaged over `n_seeds` masks. Masked regimes pair
/// the masked edges and take neighbourhoods in the visible graph; the
/// unmasked regime is deterministic and computed once.
pub fn masked_overlap_sweep(
    g: &Graph,
    k: usize,
    regimes: &[OverlapRegime],
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<OverlapReport>> {
    if n_seeds == 0 {
        return Err(Error::InvalidArgument("n_seeds must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(regimes.len());
    for r in regimes {
        let report = match r {
            OverlapRegime::NoMask => overlap_stats(g, g.edges(), k)?,
            OverlapRegime::Masked(strategy) => {
                let mut node = 0.0;
                let mut edge = 0.0;
                let mut pairs = 0;
                for s in 0..n_seeds {
                    let mask = strategy.apply(g, derive_seed(base_seed, &[s as u64]))?;
                    let rep = overlap_stats(&mask.visible_graph, &mask.masked_edges, k)?;
                    node += rep.o_node;
                    edge += rep.o_edge;
                    pairs += rep.n_pairs;
                }
                OverlapReport {
                    k,
                    regime: r.regime(),
                    o_node: node / n_seeds as f64,
                    o_edge: edge / n_seeds as f64,
                    n_pairs: pairs,
                    n_seeds,
                }
            }
        };
        out.push(OverlapReport {
            regime: r.regime(),
            ..report
        });
    }
    Ok(out)
}

/// `regime,k,o_node,o_edge,n_seeds` rows with a header line.
pub fn overlap_csv(reports: &[OverlapReport]) -> String {
    let mut s = String::from("regime,k,o_node,o_edge,n_seeds\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{}",
            r.regime.name(),
            r.k,
            r.o_node,
            r.o_edge,
            r.n_seeds
        );
    }
    s
}

/// `mean_overlap_size^2 / subgraph_cap * gamma^2`.
pub fn prop1_bound(mean_overlap_size: f64, subgraph_cap: f64, gamma: f64) -> Result<f64> {
    if subgraph_cap.is_nan() || subgraph_cap <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "subgraph size cap must be > 0, got {subgraph_cap}"
        )));
    }
    if !(mean_overlap_size >= 0.0 && gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "overlap size and gamma must be >= 0, got {mean_overlap_size} and {gamma}"
        )));
    }
    Ok(mean_overlap_size * mean_overlap_size / subgraph_cap * gamma * gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Mean `|V(u) & V(v)|` over the edge set.
    pub mean_overlap_size: f64,
    /// Largest k-hop node set in the graph.
    pub subgraph_cap: usize,
    /// Mean per-coordinate unbiased feature variance.
    pub gamma: f64,
}

impl BoundInputs {
    pub fn bound(&self) -> Result<f64> {
        prop1_bound(self.mean_overlap_size, self.subgraph_cap as f64, self.gamma)
    }
}

/// Estimates the inputs of [`prop1_bound`] from a graph with features.
pub fn estimate_bound_inputs(g: &Graph, edges: &[Edge], k: usize) -> Result<BoundInputs> {
    let features = g
        .features()
        .ok_or_else(|| Error::InvalidArgument("graph has no features".into()))?;
    if edges.is_empty() {
        return Err(Error::InvalidArgument("edge set is empty".into()));
    }
    if features.rows() < 2 {
        return Err(Error::DegenerateMetric("feature variance needs at least two nodes"));
    }
    let per_pair = pair_overlaps(g, edges, k)?;
    let mean_overlap_size =
        per_pair.iter().map(|p| p.n_shared as f64).sum::<f64>() / per_pair.len() as f64;
    let all: Vec<usize> = (0..g.n_nodes()).collect();
    let subgraph_cap = neighbourhoods(g, &all, k)
        .iter()
        .map(|h| h.nodes.len())
        .max()
        .unwrap_or(0);

    let (n, d) = features.shape();
    let mut mean = vec![0f64; d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(features.row(i)) {
            *m += x as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0f64; d];
    for i in 0..n {
        for ((s, &x), m) in var.iter_mut().zip(features.row(i)).zip(&mean) {
            *s += (x as f64 - m).powi(2);
        }
    }
    let gamma = var.iter().map(|s| s / (n - 1) as f64).sum::<f64>() / d.max(1) as f64;
    Ok(BoundInputs {
        mean_overlap_size,
        subgraph_cap,
        gamma,
    })
}
