//! Planted-partition graphs with class-correlated bag-of-words features.
//!
//! Used as a small stand-in for citation graphs in tests and demos: nodes
//! belong to classes, most edges stay within a class, node activity is
//! heavy-tailed, and each node's binary features come mostly from a
//! vocabulary block owned by its class.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, Graph};
use crate::numcore::DenseMatrix;
use crate::rng::{self, derive_seed, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub avg_degree: f64,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    /// Probability that an edge instead closes a triangle through an
    /// existing neighbour of its first endpoint.
    pub triadic_closure: f64,
    pub n_features: usize,
    pub words_per_node: usize,
    /// Probability that a word comes from the node's own class block.
    pub topic_fraction: f64,
}

impl PlantedPartition {
    /// Roughly citation-graph-like proportions at a few hundred nodes.
    pub fn citation_like(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            n_classes: 7,
            avg_degree: 4.0,
            homophily: 0.8,
            triadic_closure: 0.5,
            n_features: 300,
            words_per_node: 18,
            topic_fraction: 0.35,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.n_nodes >= 2
            && self.n_classes >= 1
            && self.n_classes <= self.n_nodes
            && self.avg_degree > 0.0
            && (0.0..=1.0).contains(&self.homophily)
            && (0.0..=1.0).contains(&self.triadic_closure)
            && (0.0..=1.0).contains(&self.topic_fraction)
            && self.n_features >= self.n_classes
            && self.words_per_node <= self.n_features;
        let max_edges = self.n_nodes * (self.n_nodes - 1) / 2;
        if !ok || self.target_edges() > max_edges / 2 {
            return Err(Error::InvalidArgument(format!("invalid planted partition {self:?}")));
        }
        Ok(())
    }

    fn target_edges(&self) -> usize {
        (self.n_nodes as f64 * self.avg_degree / 2.0).round() as usize
    }

    pub fn generate(&self, seed: u64) -> Result<Graph> {
        self.validate()?;
        let n = self.n_nodes;
        let c = self.n_classes;

        let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        labels.shuffle(&mut rng::rng(derive_seed(seed, &[0])));

        let mut r = rng::rng(derive_seed(seed, &[1]));
        // Pareto(2.5) activity weights, capped.
        let weight: Vec<f64> = (0..n)
            .map(|_| (1.0 - r.random::<f64>()).powf(-1.0 / 1.5).min(40.0))
            .collect();
        let members: Vec<Vec<usize>> = (0..c)
            .map(|k| (0..n).filter(|&v| labels[v] == k).collect())
            .collect();
        let global = Cumulative::new((0..n).collect(), &weight);
        let per_class: Vec<Cumulative> = members
            .iter()
            .map(|m| Cumulative::new(m.clone(), &weight))
            .collect();

        let target = self.target_edges();
        let mut seen = std::collections::HashSet::with_capacity(target);
        let mut edges: Vec<Edge> = Vec::with_capacity(target);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        while edges.len() < target {
            let u = global.sample(&mut r);
            let v = if !adj[u].is_empty() && r.random::<f64>() < self.triadic_closure {
                let w = adj[u][r.random_range(0..adj[u].len())];
                adj[w][r.random_range(0..adj[w].len())]
            } else if r.random::<f64>() < self.homophily {
                per_class[labels[u]].sample(&mut r)
            } else {
                global.sample(&mut r)
            };
            if u != v && seen.insert(canonical(u, v)) {
                edges.push(canonical(u, v));
                adj[u].push(v);
                adj[v].push(u);
            }
        }

        let mut r = rng::rng(derive_seed(seed, &[2]));
        let block = self.n_features / c;
        let mut x = DenseMatrix::zeros(n, self.n_features);
        for (v, &label) in labels.iter().enumerate() {
            let mut placed = 0;
            while placed < self.words_per_node {
                let w = if r.random::<f64>() < self.topic_fraction {
                    label * block + r.random_range(0..block)
                } else {
                    r.random_range(0..self.n_features)
                };
                if x.get(v, w) == 0.0 {
                    x.set(v, w, 1.0);
                    placed += 1;
                }
            }
        }

        Graph::from_edges(n, edges)?.with_features(x)?.with_labels(labels)
    }
}

struct Cumulative {
    items: Vec<usize>,
    cum: Vec<f64>,
}

impl Cumulative {
    fn new(items: Vec<usize>, weight: &[f64]) -> Self {
        let mut acc = 0.0;
        let cum = items
            .iter()
            .map(|&i| {
                acc += weight[i];
                acc
            })
            .collect();
        Self { items, cum }
    }

    fn sample(&self, r: &mut Rng) -> usize {
        let total = *self.cum.last().expect("non-empty class");
        let t = r.random::<f64>() * total;
        let i = self.cum.partition_point(|&c| c <= t).min(self.items.len() - 1);
        self.items[i]
    }
}
