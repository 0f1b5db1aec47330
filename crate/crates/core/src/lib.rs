//! Masked graph autoencoders from scratch.
//!
//! The pipeline masks part of a graph's edges (independently per edge, or
//! along random walks), encodes the visible remainder with a GCN, and trains
//! structure and degree decoders to reconstruct what was hidden. Learned
//! embeddings are evaluated by link prediction (AUC/AP) and by a linear probe
//! for node classification; [`analysis`] measures how much the k-hop
//! neighbourhoods of positive pairs overlap with and without masking.

pub mod analysis;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod masking;
pub mod models;
pub mod numcore;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeSplit, Graph};
pub use masking::MaskSplit;
