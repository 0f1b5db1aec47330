use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{canonical, Edge, Graph};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Train/validation/test partition of a graph's edges for link prediction.
#[derive(Clone, Debug)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub val_pos: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub test_neg: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct EdgeSplitFile {
    n_nodes: usize,
    train: Vec<Edge>,
    val_pos: Vec<Edge>,
    val_neg: Vec<Edge>,
    test_pos: Vec<Edge>,
    test_neg: Vec<Edge>,
}

impl EdgeSplit {
    /// JSON with keys `train`, `val_pos`, `val_neg`, `test_pos`, `test_neg`
    /// (each a list of `[u, v]`), plus `n_nodes`.
    pub fn to_json(&self) -> String {
        let file = EdgeSplitFile {
            n_nodes: self.train_graph.n_nodes(),
            train: self.train_graph.edges().to_vec(),
            val_pos: self.val_pos.clone(),
            val_neg: self.val_neg.clone(),
            test_pos: self.test_pos.clone(),
            test_neg: self.test_neg.clone(),
        };
        serde_json::to_string(&file).expect("edge lists serialize")
    }

    /// Parses a split. When `dataset` is given, the train graph shares its
    /// features and labels and the node counts must agree.
    pub fn from_json(text: &str, dataset: Option<&Graph>) -> Result<Self> {
        let file: EdgeSplitFile = serde_json::from_str(text)?;
        let train_graph = match dataset {
            Some(g) => {
                if g.n_nodes() != file.n_nodes {
                    return Err(Error::InvalidArgument(format!(
                        "split has {} nodes but dataset has {}",
                        file.n_nodes,
                        g.n_nodes()
                    )));
                }
                g.with_edges(file.train)?
            }
            None => Graph::from_edges(file.n_nodes, file.train)?,
        };
        let n = file.n_nodes;
        for (u, v) in file
            .val_pos
            .iter()
            .chain(&file.val_neg)
            .chain(&file.test_pos)
            .chain(&file.test_neg)
        {
            if *u >= n || *v >= n {
                return Err(Error::NodeOutOfRange {
                    node: (*u).max(*v),
                    n_nodes: n,
                });
            }
        }
        Ok(Self {
            train_graph,
            val_pos: file.val_pos,
            val_neg: file.val_neg,
            test_pos: file.test_pos,
            test_neg: file.test_neg,
        })
    }

    pub fn load(path: &Path, dataset: Option<&Graph>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, dataset)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Draws `count` distinct canonical non-edges of `g` (no self-loops).
///
/// Sparse graphs use rejection sampling; when non-edges are scarce the full
/// non-edge list is enumerated and shuffled instead.
pub fn sample_distinct_non_edges(g: &Graph, count: usize, rng: &mut Rng) -> Result<Vec<Edge>> {
    let available = g.n_non_edges();
    if count > available {
        return Err(Error::NotEnoughNonEdges {
            requested: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = g.n_nodes();
    if available < 4 * count {
        let mut all: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        return Ok(all);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || g.has_edge(u, v) {
            continue;
        }
        let e = canonical(u, v);
        if seen.insert(e) {
            out.push(e);
        }
    }
    Ok(out)
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::InvalidArgument(format!("{name} must be in [0, 1), got {f}")));
    }
    Ok(())
}

/// Holds out `round(val_frac * |E|)` and `round(test_frac * |E|)` uniformly
/// chosen edges, each paired with as many non-edges of the original graph.
pub fn split_edges(g: &Graph, val_frac: f64, test_frac: f64, seed: u64) -> Result<EdgeSplit> {
    check_fraction("val_frac", val_frac)?;
    check_fraction("test_frac", test_frac)?;
    if val_frac + test_frac >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "val_frac + test_frac must be < 1, got {}",
            val_frac + test_frac
        )));
    }
    let m = g.n_edges();
    let n_val = (val_frac * m as f64).round() as usize;
    let n_test = (test_frac * m as f64).round() as usize;

    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng::rng(rng::derive_seed(seed, &[0])));
    let val_pos: Vec<Edge> = order[..n_val].iter().map(|&i| g.edges()[i]).collect();
    let test_pos: Vec<Edge> = order[n_val..n_val + n_test]
        .iter()
        .map(|&i| g.edges()[i])
        .collect();
    let mut keep = vec![true; m];
    for &i in &order[..n_val + n_test] {
        keep[i] = false;
    }

    let val_neg = sample_distinct_non_edges(g, n_val, &mut rng::rng(rng::derive_seed(seed, &[1])))?;
    let test_neg = sample_distinct_non_edges(g, n_test, &mut rng::rng(rng::derive_seed(seed, &[2])))?;

    Ok(EdgeSplit {
        train_graph: g.with_edge_mask(&keep),
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}
