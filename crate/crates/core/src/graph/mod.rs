//! Immutable undirected graphs in CSR form.

mod io;
mod split;

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numcore::{DenseMatrix, SparseMatrix};

pub use io::{load_features, load_graph, load_labels, parse_edge_list, write_features};
pub use split::{sample_distinct_non_edges, split_edges, EdgeSplit};

/// Undirected edge in canonical `(u, v)` form with `u < v`.
pub type Edge = (usize, usize);

#[inline]
pub fn canonical(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Undirected, unweighted graph. Each edge is stored once as `(u, v)` with
/// `u < v`; the CSR adjacency holds both directions with neighbour lists
/// sorted ascending. Node features and labels are shared between graphs
/// derived from the same dataset.
#[derive(Clone, Debug)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    /// Canonical edge id of each CSR slot.
    slot_edge: Vec<usize>,
    features: Option<Arc<DenseMatrix<f32>>>,
    labels: Option<Arc<Vec<usize>>>,
}

impl Graph {
    /// Builds a graph from arbitrary edge pairs. Reversed and repeated pairs
    /// collapse to one canonical edge; self-loops and out-of-range ids are
    /// rejected.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = Vec::new();
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n_nodes {
                    return Err(Error::NodeOutOfRange { node: x, n_nodes });
                }
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
            }
            canon.push(canonical(u, v));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical_sorted(n_nodes, canon))
    }

    fn from_canonical_sorted(n_nodes: usize, edges: Vec<Edge>) -> Self {
        let mut counts = vec![0usize; n_nodes + 1];
        for &(u, v) in &edges {
            counts[u + 1] += 1;
            counts[v + 1] += 1;
        }
        for i in 0..n_nodes {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut slot_edge = vec![0usize; 2 * edges.len()];
        // Smaller neighbours first (edges sorted by (u, v) give ascending u
        // per v), then larger ones (ascending v per u).
        for (id, &(u, v)) in edges.iter().enumerate() {
            let p = next[v];
            neighbors[p] = u;
            slot_edge[p] = id;
            next[v] += 1;
        }
        for (id, &(u, v)) in edges.iter().enumerate() {
            let p = next[u];
            neighbors[p] = v;
            slot_edge[p] = id;
            next[u] += 1;
        }
        Self {
            n_nodes,
            edges,
            offsets,
            neighbors,
            slot_edge,
            features: None,
            labels: None,
        }
    }

    /// A graph on `n_nodes` isolated nodes.
    pub fn empty(n_nodes: usize) -> Self {
        Self::from_canonical_sorted(n_nodes, Vec::new())
    }

    pub fn with_features(mut self, features: DenseMatrix<f32>) -> Result<Self> {
        if features.rows() != self.n_nodes {
            return Err(Error::InvalidArgument(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                self.n_nodes
            )));
        }
        self.features = Some(Arc::new(features));
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_nodes {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n_nodes
            )));
        }
        self.labels = Some(Arc::new(labels));
        Ok(self)
    }

    /// Graph on the same node set (sharing features and labels) with the
    /// given edges instead.
    pub fn with_edges<I>(&self, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::from_edges(self.n_nodes, edges)?;
        g.features = self.features.clone();
        g.labels = self.labels.clone();
        Ok(g)
    }

    /// Subgraph keeping only the edges whose ids are selected.
    pub(crate) fn with_edge_mask(&self, keep: &[bool]) -> Self {
        let edges = self
            .edges
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(&e, _)| e)
            .collect();
        let mut g = Self::from_canonical_sorted(self.n_nodes, edges);
        g.features = self.features.clone();
        g.labels = self.labels.clone();
        g
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edges, sorted ascending.
    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn csr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn csr_neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Canonical edge ids aligned with [`Graph::neighbors`].
    #[inline]
    pub fn neighbor_edge_ids(&self, v: usize) -> &[usize] {
        &self.slot_edge[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n_nodes).map(|v| self.degree(v)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_id(u, v).is_some()
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.n_nodes || v >= self.n_nodes {
            return None;
        }
        let (a, b) = if self.degree(u) <= self.degree(v) { (u, v) } else { (v, u) };
        self.neighbors(a)
            .binary_search(&b)
            .ok()
            .map(|p| self.slot_edge[self.offsets[a] + p])
    }

    pub fn features(&self) -> Option<&DenseMatrix<f32>> {
        self.features.as_deref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref().map(Vec::as_slice)
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.labels().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.n_nodes {
            return Err(Error::NodeOutOfRange {
                node: v,
                n_nodes: self.n_nodes,
            });
        }
        Ok(())
    }

    /// Number of unordered node pairs that are not edges.
    pub fn n_non_edges(&self) -> usize {
        let n = self.n_nodes;
        (n * n.saturating_sub(1)) / 2 - self.edges.len()
    }
}

/// Number of neighbours of every node.
pub fn degrees(g: &Graph) -> Vec<usize> {
    g.degrees()
}

/// Nodes within BFS distance `k` of `v` (sorted) and the canonical edges of
/// the subgraph they induce.
pub fn k_hop_subgraph(g: &Graph, v: usize, k: usize) -> Result<(Vec<usize>, Vec<Edge>)> {
    g.check_node(v)?;
    let mut scratch = KHopScratch::new(g.n_nodes());
    let mut nodes = scratch.nodes(g, v, k).to_vec();
    nodes.sort_unstable();
    let mut edges = Vec::new();
    for &a in &nodes {
        for &b in g.neighbors(a) {
            if a < b && scratch.contains(b) {
                edges.push((a, b));
            }
        }
    }
    Ok((nodes, edges))
}

/// Reusable BFS buffers for repeated k-hop queries on one graph.
pub struct KHopScratch {
    mark: Vec<u32>,
    epoch: u32,
    visited: Vec<usize>,
    queue: VecDeque<(usize, usize)>,
}

impl KHopScratch {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            mark: vec![0; n_nodes],
            epoch: 0,
            visited: Vec::new(),
            queue: VecDeque::new(),
        }
    }

    /// Nodes within distance `k` of `v`, in BFS order. Valid until the next
    /// call; [`KHopScratch::contains`] answers membership for the same set.
    pub fn nodes(&mut self, g: &Graph, v: usize, k: usize) -> &[usize] {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        self.visited.clear();
        self.queue.clear();
        self.mark[v] = self.epoch;
        self.visited.push(v);
        self.queue.push_back((v, 0));
        while let Some((x, d)) = self.queue.pop_front() {
            if d == k {
                continue;
            }
            for &y in g.neighbors(x) {
                if self.mark[y] != self.epoch {
                    self.mark[y] = self.epoch;
                    self.visited.push(y);
                    self.queue.push_back((y, d + 1));
                }
            }
        }
        &self.visited
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.mark[x] == self.epoch
    }
}

/// GCN propagation matrix. With self-loops this is
/// `D~^{-1/2} (A + I) D~^{-1/2}` with `D~ = D + I`; without, `D^{-1/2} A D^{-1/2}`
/// (isolated nodes get empty rows).
pub fn normalized_adjacency(g: &Graph, add_self_loops: bool) -> SparseMatrix<f32> {
    let n = g.n_nodes();
    let shift = usize::from(add_self_loops);
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| {
            let d = (g.degree(v) + shift) as f64;
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(2 * g.n_edges() + n * shift);
    let mut values = Vec::with_capacity(indices.capacity());
    offsets.push(0);
    for i in 0..n {
        let mut pushed_self = !add_self_loops;
        for &j in g.neighbors(i) {
            if !pushed_self && j > i {
                indices.push(i);
                values.push((inv_sqrt[i] * inv_sqrt[i]) as f32);
                pushed_self = true;
            }
            indices.push(j);
            values.push((inv_sqrt[i] * inv_sqrt[j]) as f32);
        }
        if !pushed_self {
            indices.push(i);
            values.push((inv_sqrt[i] * inv_sqrt[i]) as f32);
        }
        offsets.push(indices.len());
    }
    SparseMatrix::new(n, n, offsets, indices, values).expect("valid CSR by construction")
}
