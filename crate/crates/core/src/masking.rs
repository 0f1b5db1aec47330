//! Edge masking strategies.
//!
//! Both strategies partition the canonical edges of a graph into a masked set
//! (reconstruction targets) and a visible set (what the encoder sees).
//! Edge-wise masking drops each edge independently with probability `p`;
//! path-wise masking drops every edge traversed by short uniform random walks
//! started from degree-weighted root nodes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::rng::{self, derive_seed};

#[derive(Clone, Debug)]
pub struct MaskSplit {
    pub masked_edges: Vec<Edge>,
    pub visible_edges: Vec<Edge>,
    pub visible_graph: Graph,
}

#[derive(Serialize, Deserialize)]
struct MaskSplitFile {
    masked: Vec<Edge>,
    visible: Vec<Edge>,
}

impl MaskSplit {
    fn from_mask(g: &Graph, masked: &[bool]) -> Self {
        let mut masked_edges = Vec::new();
        let mut visible_edges = Vec::new();
        for (&e, &m) in g.edges().iter().zip(masked) {
            if m {
                masked_edges.push(e);
            } else {
                visible_edges.push(e);
            }
        }
        let keep: Vec<bool> = masked.iter().map(|m| !m).collect();
        Self {
            masked_edges,
            visible_edges,
            visible_graph: g.with_edge_mask(&keep),
        }
    }

    /// Number of masked edges incident to each node.
    pub fn masked_degrees(&self, n_nodes: usize) -> Vec<usize> {
        let mut d = vec![0; n_nodes];
        for &(u, v) in &self.masked_edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    /// `{"masked": [[u, v], ...], "visible": [[u, v], ...]}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MaskSplitFile {
            masked: self.masked_edges.clone(),
            visible: self.visible_edges.clone(),
        })
        .expect("edge lists serialize")
    }
}

/// Masks each canonical edge independently with probability `p`.
pub fn mask_edges_bernoulli(g: &Graph, p: f64, seed: u64) -> Result<MaskSplit> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("masking rate must be in [0, 1], got {p}")));
    }
    let mut r = rng::rng(seed);
    let masked: Vec<bool> = (0..g.n_edges()).map(|_| r.random::<f64>() < p).collect();
    Ok(MaskSplit::from_mask(g, &masked))
}

/// Samples `ceil(fraction * n_nodes)` distinct roots without replacement,
/// each draw proportional to degree among the nodes not yet chosen.
/// Isolated nodes are never chosen; if fewer positive-degree nodes exist than
/// requested, all of them are returned. Output is sorted.
pub fn sample_roots(g: &Graph, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "root fraction must be in (0, 1], got {fraction}"
        )));
    }
    let requested = (fraction * g.n_nodes() as f64).ceil() as usize;
    let mut r = rng::rng(seed);
    // Efraimidis-Spirakis keys: ordering by ln(u)/w reproduces sequential
    // weighted sampling without replacement.
    let mut keyed: Vec<(f64, usize)> = (0..g.n_nodes())
        .filter(|&v| g.degree(v) > 0)
        .map(|v| {
            let u = 1.0 - r.random::<f64>();
            (u.ln() / g.degree(v) as f64, v)
        })
        .collect();
    let count = if requested > keyed.len() {
        log::warn!(
            "requested {requested} roots but only {} nodes have neighbours; using all of them",
            keyed.len()
        );
        keyed.len()
    } else {
        requested
    };
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut roots: Vec<usize> = keyed[..count].iter().map(|&(_, v)| v).collect();
    roots.sort_unstable();
    Ok(roots)
}

/// Node sequences of `n_walk` uniform random walks of up to `l_walk` steps
/// from each root. A walk stops early at a node without neighbours.
pub fn random_walks(
    g: &Graph,
    roots: &[usize],
    n_walk: usize,
    l_walk: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n_walk == 0 || l_walk == 0 {
        return Err(Error::InvalidArgument(format!(
            "n_walk and l_walk must be >= 1, got {n_walk} and {l_walk}"
        )));
    }
    for &v in roots {
        g.check_node(v)?;
    }
    let mut r = rng::rng(seed);
    let mut walks = Vec::with_capacity(roots.len() * n_walk);
    for &root in roots {
        for _ in 0..n_walk {
            let mut walk = Vec::with_capacity(l_walk + 1);
            let mut cur = root;
            walk.push(cur);
            for _ in 0..l_walk {
                let nb = g.neighbors(cur);
                if nb.is_empty() {
                    break;
                }
                cur = nb[r.random_range(0..nb.len())];
                walk.push(cur);
            }
            walks.push(walk);
        }
    }
    Ok(walks)
}

/// Masks every edge traversed by random walks from `roots` over the full
/// graph `g`. Revisited edges are masked once.
pub fn mask_edges_path(
    g: &Graph,
    roots: &[usize],
    n_walk: usize,
    l_walk: usize,
    seed: u64,
) -> Result<MaskSplit> {
    let walks = random_walks(g, roots, n_walk, l_walk, seed)?;
    let mut masked = vec![false; g.n_edges()];
    for w in &walks {
        for step in w.windows(2) {
            let id = g.edge_id(step[0], step[1]).expect("walks follow edges");
            masked[id] = true;
        }
    }
    Ok(MaskSplit::from_mask(g, &masked))
}

/// A masking strategy with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum MaskingStrategy {
    Edge {
        p: f64,
    },
    Path {
        root_fraction: f64,
        n_walk: usize,
        l_walk: usize,
    },
}

impl MaskingStrategy {
    pub const DEFAULT_EDGE: MaskingStrategy = MaskingStrategy::Edge { p: 0.7 };
    pub const DEFAULT_PATH: MaskingStrategy = MaskingStrategy::Path {
        root_fraction: 0.5,
        n_walk: 2,
        l_walk: 4,
    };

    pub fn name(&self) -> &'static str {
        match self {
            MaskingStrategy::Edge { .. } => "edge",
            MaskingStrategy::Path { .. } => "path",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MaskingStrategy::Edge { p } if !(0.0..=1.0).contains(&p) => Err(
                Error::InvalidArgument(format!("masking rate must be in [0, 1], got {p}")),
            ),
            MaskingStrategy::Path {
                root_fraction,
                n_walk,
                l_walk,
            } if !(root_fraction > 0.0 && root_fraction <= 1.0) || n_walk == 0 || l_walk == 0 => {
                Err(Error::InvalidArgument(format!(
                    "path masking needs root_fraction in (0, 1] and n_walk, l_walk >= 1 \
                     (got {root_fraction}, {n_walk}, {l_walk})"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Masks `g`. An edgeless graph yields an empty mask.
    pub fn apply(&self, g: &Graph, seed: u64) -> Result<MaskSplit> {
        self.validate()?;
        if g.n_edges() == 0 {
            return Ok(MaskSplit::from_mask(g, &[]));
        }
        match *self {
            MaskingStrategy::Edge { p } => mask_edges_bernoulli(g, p, seed),
            MaskingStrategy::Path {
                root_fraction,
                n_walk,
                l_walk,
            } => {
                let roots = sample_roots(g, root_fraction, derive_seed(seed, &[0]))?;
                mask_edges_path(g, &roots, n_walk, l_walk, derive_seed(seed, &[1]))
            }
        }
    }
}
